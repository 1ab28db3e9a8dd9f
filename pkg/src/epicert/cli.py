"""Command-line front end.

Subcommands: certify, verify, theorem2, sweep-rockafellar, list-catalog.

Exit codes are a stable contract:
    0  success
    1  input error (bad flags, unreadable files, point not on the boundary)
    2  degenerate point (no descent direction; also theorem2 = false, and
       a descent radius that shrinks to nothing)
    3  lemma-check failure (certificate produced or loaded, suite rejected
       it; also a non-monotone sweep)
    4  seed reuse refused by the verifier
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import sys

import numpy as np

from . import catalog as _catalog
from .core import NumericConfig, ProblemInstance, canonical_json
from .epirep import (
    CertificationFailure,
    EpigraphCertificate,
    certificate_from_json,
    certify,
)
from .instancefile import InstanceSpecError, load_instance_file
from .signed_distance import check_theorem2, promote_to_certificate
from .verify import SeedReuseError, run_suite

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DEGENERATE = 2
EXIT_LEMMA = 3
EXIT_SEED_REUSE = 4

_FAILURE_EXIT = {
    "precondition": EXIT_INPUT,
    "degenerate-point": EXIT_DEGENERATE,
    "radius-underflow": EXIT_DEGENERATE,
    "lemma-check-failure": EXIT_LEMMA,
}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    instance_path_or_id: str
    point: np.ndarray | None
    seed: int | None
    out: str | None
    format: str


def _error(message: str, extra: dict | None = None) -> None:
    payload = dict(extra or {})
    payload.pop("message", None)
    payload["error"] = message
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    print(text)


def _resolve_instance(args) -> tuple[ProblemInstance, NumericConfig, object]:
    if args.catalog and args.instance:
        raise InstanceSpecError("give either --catalog or --instance, not both")
    if args.catalog:
        try:
            entry = _catalog.load(args.catalog)
        except KeyError as exc:
            raise InstanceSpecError(str(exc)) from exc
        inst, cfg = entry.instance, NumericConfig()
    elif args.instance:
        inst, cfg, entry = load_instance_file(args.instance)
    else:
        raise InstanceSpecError("one of --catalog or --instance is required")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, rng_seed=args.seed)
    return inst, cfg, entry


def _resolve_point(inst: ProblemInstance, args) -> np.ndarray:
    if getattr(args, "point", None):
        try:
            p = np.asarray([float(t) for t in args.point.split(",")], dtype=float)
        except ValueError as exc:
            raise InstanceSpecError(f"bad --point: {exc}") from exc
        if p.shape != (inst.space.dim,):
            raise InstanceSpecError(
                f"--point has {p.shape[0]} coordinates, space has {inst.space.dim}"
            )
        return p
    idx = getattr(args, "point_index", 0) or 0
    if not inst.boundary_points:
        raise InstanceSpecError("instance declares no boundary points; use --point")
    if not (0 <= idx < len(inst.boundary_points)):
        raise InstanceSpecError(
            f"--point-index {idx} out of range ({len(inst.boundary_points)} declared)"
        )
    return np.asarray(inst.boundary_points[idx], dtype=float)


def _certificate_text(cert: EpigraphCertificate, fmt: str) -> str:
    if fmt == "csv":
        # the stored cylinder slice of lambda, one row per sample
        buf = io.StringIO()
        dim = cert.space.dim
        buf.write(",".join(f"x{i + 1}" for i in range(dim)) + ",lambda\n")
        for p, val in cert.lambda_samples:
            buf.write(",".join(repr(float(c)) for c in p) + f",{val!r}\n")
        return buf.getvalue().rstrip("\n")
    if fmt == "table":
        w = cert.witness
        lines = [
            f"instance      {cert.instance_label}",
            f"x             {np.asarray(w.x).tolist()}",
            f"v             {np.asarray(w.v).tolist()}",
            f"alpha         {w.alpha:.12g}",
            f"r             {w.r:.12g}",
            f"k             {w.k:.12g}",
            f"epsilon       {w.epsilon:.12g}",
            f"bound 1+2k/a  {cert.lipschitz_bound:.12g}",
            f"measured      {cert.measured_lipschitz:.12g}",
            f"confidence    {cert.confidence}",
        ]
        if cert.report is not None:
            lines.append("")
            lines.append(cert.report.table())
        return "\n".join(lines)
    return canonical_json(cert.to_json_dict())


def cmd_certify(args) -> int:
    inst, cfg, _ = _resolve_instance(args)
    x = _resolve_point(inst, args)
    res = certify(inst, x, cfg)
    if isinstance(res, CertificationFailure):
        _error(res.message, res.to_json_dict())
        return _FAILURE_EXIT.get(res.stage, EXIT_LEMMA)
    text = _certificate_text(res, args.format)
    if args.out and args.format != "json":
        # out always receives the canonical JSON, stdout follows --format
        with open(args.out, "w") as fh:
            fh.write(canonical_json(res.to_json_dict()) + "\n")
        print(text)
    else:
        _emit(text, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst, cfg, _ = _resolve_instance(args)
    try:
        with open(args.certificate) as fh:
            cert = certificate_from_json(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise InstanceSpecError(f"cannot load certificate: {exc}") from exc
    if args.seed is None:
        # fresh by default; an explicit matching --seed still trips the guard
        cfg = dataclasses.replace(cfg, rng_seed=cert.seed + 1)
    try:
        report = run_suite(inst, cert, cfg)
    except SeedReuseError as exc:
        _error(str(exc))
        return EXIT_SEED_REUSE
    text = report.table() if args.format == "table" else canonical_json(report.to_json_dict())
    _emit(text, args.out)
    return EXIT_OK if report.overall else EXIT_LEMMA


def cmd_theorem2(args) -> int:
    inst, cfg, _ = _resolve_instance(args)
    x = _resolve_point(inst, args)
    t2 = check_theorem2(inst, x, cfg)
    payload = {
        "nondegenerate": t2.nondegenerate,
        "alpha": t2.alpha,
        "witness": None if t2.witness is None else t2.witness.coords.tolist(),
        "probe_resolution": t2.probe_resolution,
        "directions_tried": t2.directions_tried,
        "note": t2.note,
    }
    if not t2.nondegenerate:
        _emit(canonical_json(payload), args.out)
        return EXIT_DEGENERATE
    if args.promote:
        res = promote_to_certificate(inst, x, cfg)
        if isinstance(res, CertificationFailure):
            _emit(canonical_json(payload), None)
            _error(res.message, res.to_json_dict())
            return _FAILURE_EXIT.get(res.stage, EXIT_LEMMA)
        payload["certificate"] = res.to_json_dict()
    _emit(canonical_json(payload), args.out)
    return EXIT_OK


def cmd_sweep_rockafellar(args) -> int:
    try:
        d_list = [int(t) for t in args.d_list.split(",") if t.strip()]
    except ValueError as exc:
        raise InstanceSpecError(f"bad --d-list: {exc}") from exc
    if not d_list:
        raise InstanceSpecError("--d-list is empty")
    seed = args.seed if args.seed is not None else 0
    cfg = NumericConfig(rng_seed=seed)
    rows = []
    for d in d_list:
        entry = _catalog.load(f"rockafellar_{d}")
        res = certify(entry.instance, entry.certifiable_at[0], cfg)
        if isinstance(res, CertificationFailure):
            _error(f"d={d}: {res.message}", res.to_json_dict())
            return _FAILURE_EXIT.get(res.stage, EXIT_LEMMA)
        w = res.witness
        rows.append((d, w.alpha, w.r, w.k, w.epsilon,
                     res.lipschitz_bound, res.measured_lipschitz))
    header = "d,alpha,r,k,epsilon,lipschitz_bound,measured_lipschitz"
    body = "\n".join(",".join(repr(c) if i else str(c) for i, c in enumerate(row))
                     for row in rows)
    _emit(header + "\n" + body, args.out)
    eps = [row[4] for row in rows]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        _error("epsilon not strictly decreasing across the sweep",
               {"epsilons": eps, "d_list": d_list})
        return EXIT_LEMMA
    return EXIT_OK


def cmd_list_catalog(args) -> int:
    rows = _catalog.list_catalog()
    if args.format == "json":
        _emit(canonical_json(rows), args.out)
        return EXIT_OK
    widths = {k: max(len(k), *(len(str(r[k])) for r in rows)) for k in rows[0]}
    keys = list(rows[0])
    lines = ["  ".join(k.ljust(widths[k]) for k in keys)]
    for r in rows:
        lines.append("  ".join(str(r[k]).ljust(widths[k]) for k in keys))
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def _add_instance_flags(p: argparse.ArgumentParser, with_point: bool = True) -> None:
    p.add_argument("--instance", help="path to an instance JSON file")
    p.add_argument("--catalog", help="built-in catalog id")
    if with_point:
        p.add_argument("--point", help='coordinates "x1,x2,..."')
        p.add_argument("--point-index", type=int, default=0,
                       help="index into the instance's declared boundary points")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="also write the primary output to this path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="epicert",
        description="Certify that a sublevel set is locally the epigraph of "
                    "a Lipschitz function, and verify such certificates.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="build a certificate at a boundary point")
    _add_instance_flags(p)
    p.add_argument("--format", choices=("json", "table", "csv"), default="json")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="re-run the lemma suite on a stored certificate")
    _add_instance_flags(p, with_point=False)
    p.add_argument("--certificate", required=True, help="certificate JSON path")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("theorem2", help="signed-distance nondegeneracy check")
    _add_instance_flags(p)
    p.add_argument("--promote", action="store_true",
                   help="additionally certify against the signed distance")
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_theorem2)

    p = sub.add_parser("sweep-rockafellar", help="certify the truncation family over d")
    p.add_argument("--d-list", required=True, help='comma list, e.g. "1,2,4,8"')
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_sweep_rockafellar)

    p = sub.add_parser("list-catalog", help="show built-in instances")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_list_catalog)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; keep 1 as the input-error code
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except InstanceSpecError as exc:
        _error(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
