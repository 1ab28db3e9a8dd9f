#!/usr/bin/env python3
"""Certify every fixed catalog entry at every declared boundary point.

Prints one line per point with the extracted witness data, and a short
summary of expected degeneracies.  Useful as a quick end-to-end health check
after touching the pipeline.
"""

import argparse
import time

import numpy as np

from epicert import CertificationFailure, NumericConfig, certify
from epicert.catalog import FIXED_IDS, load


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    cfg = NumericConfig(rng_seed=args.seed)

    bad = 0
    for cid in FIXED_IDS:
        entry = load(cid)
        for pt in entry.certifiable_at:
            t0 = time.perf_counter()
            res = certify(entry.instance, pt, cfg)
            dt = time.perf_counter() - t0
            if isinstance(res, CertificationFailure):
                bad += 1
                print(f"{cid:18s} {np.round(pt, 3)!s:14s} FAILED ({res.stage}) {dt:5.2f}s")
                continue
            w = res.witness
            print(
                f"{cid:18s} {np.round(pt, 3)!s:14s} alpha={w.alpha:6.4f} r={w.r:7.4g} "
                f"k={w.k:6.4g} eps={w.epsilon:9.4g} measured={res.measured_lipschitz:6.4f} "
                f"suite={'pass' if res.report.overall else 'FAIL'} {dt:5.2f}s"
            )
        for pt in entry.degenerate_at:
            res = certify(entry.instance, pt, cfg)
            got = isinstance(res, CertificationFailure) and res.stage == "degenerate-point"
            if not got:
                bad += 1
            print(f"{cid:18s} {np.round(pt, 3)!s:14s} degenerate as expected: {got}")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
