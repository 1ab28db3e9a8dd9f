#!/usr/bin/env python3
"""Sweep the truncation family and watch the certified neighbourhood shrink.

For each d the local Lipschitz constant grows like 2d, so epsilon = alpha *
r / (4 k) collapses; this is the finite-dimensional shadow of the
infinite-dimensional instance whose sublevel set has empty interior.
Writes the same CSV as `epicert sweep-rockafellar` plus a comparison column
against the closed-form constant.
"""

import argparse
import math
import sys

from epicert import CertificationFailure, NumericConfig, certify
from epicert.catalog import rockafellar_truncation


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--d-list", default="1,2,4,8,16,32,64")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = NumericConfig(rng_seed=args.seed)
    d_list = [int(t) for t in args.d_list.split(",") if t.strip()]
    if not d_list:
        print("empty --d-list", file=sys.stderr)
        return 1

    rows = ["d,alpha,r,k,epsilon,k_closed_form,k_ratio"]
    prev_eps = None
    ok = True
    for d in d_list:
        entry = rockafellar_truncation(d)
        res = certify(entry.instance, entry.certifiable_at[0], cfg)
        if isinstance(res, CertificationFailure):
            print(f"d={d}: certification failed at stage {res.stage}", file=sys.stderr)
            return 2
        w = res.witness
        k_exact = math.sqrt(4.0 * d * d * w.r * w.r + 1.0)
        rows.append(
            f"{d},{w.alpha!r},{w.r!r},{w.k!r},{w.epsilon!r},{k_exact!r},{w.k / k_exact:.4f}"
        )
        if prev_eps is not None and w.epsilon >= prev_eps:
            ok = False
        prev_eps = w.epsilon

    text = "\n".join(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if not ok:
        print("epsilon failed to decrease monotonically", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
