"""Instance files: JSON descriptions of a problem to certify.

Layout:

    {
      "space": {"dim": 2, "norm": "euclidean"},      optional with catalog_id
      "function": {"expression": ["max", "x1", "x2"],
                   "lipschitz_hint": 1.0}            or {"catalog_id": "..."}
      "boundary_points": [[0.0, 0.0]],               optional with catalog_id
      "config": {"rng_seed": 7}                      optional, NumericConfig fields
    }

Catalog references inherit the entry's space, points, and reference data;
explicit boundary_points replace the entry's list.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from . import catalog
from .core import NORM_KINDS, FunctionOracle, NormedSpace, NumericConfig, ProblemInstance
from .expressions import compile_expression

__all__ = ["InstanceSpecError", "parse_instance", "load_instance_file"]


class InstanceSpecError(ValueError):
    pass


def _parse_space(data: dict) -> NormedSpace:
    try:
        dim = int(data["dim"])
        norm = str(data.get("norm", "euclidean"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceSpecError(f"bad space section: {exc}") from exc
    if norm not in NORM_KINDS:
        raise InstanceSpecError(f"unknown norm {norm!r}, expected one of {NORM_KINDS}")
    if dim < 1:
        raise InstanceSpecError("space dim must be >= 1")
    return NormedSpace(dim, norm)


def _parse_points(raw, dim: int) -> tuple[np.ndarray, ...]:
    pts = []
    for i, row in enumerate(raw):
        p = np.asarray(row, dtype=float)
        if p.shape != (dim,):
            raise InstanceSpecError(f"boundary point {i} has shape {p.shape}, expected ({dim},)")
        pts.append(p)
    return tuple(pts)


def parse_instance(data: dict) -> tuple[ProblemInstance, NumericConfig, catalog.CatalogEntry | None]:
    """Build (instance, config, catalog entry or None) from parsed JSON."""
    if not isinstance(data, dict):
        raise InstanceSpecError("instance file must hold a JSON object")
    fn = data.get("function")
    if not isinstance(fn, dict):
        raise InstanceSpecError("missing function section")

    entry = None
    if "catalog_id" in fn:
        try:
            entry = catalog.load(str(fn["catalog_id"]))
        except KeyError as exc:
            raise InstanceSpecError(str(exc)) from exc
        inst = entry.instance
        if "space" in data:
            declared = _parse_space(data["space"])
            if (declared.dim, declared.norm_kind) != (inst.space.dim, inst.space.norm_kind):
                raise InstanceSpecError(
                    f"space {declared.dim}/{declared.norm_kind} conflicts with catalog "
                    f"entry {inst.space.dim}/{inst.space.norm_kind}"
                )
        if "boundary_points" in data:
            pts = _parse_points(data["boundary_points"], inst.space.dim)
            inst = dataclasses.replace(inst, boundary_points=pts)
    elif "expression" in fn:
        if "space" not in data:
            raise InstanceSpecError("expression instances need a space section")
        space = _parse_space(data["space"])
        oracle: FunctionOracle = compile_expression(fn["expression"], space.dim)
        hint = fn.get("lipschitz_hint")
        if hint is not None:
            oracle = dataclasses.replace(oracle, lipschitz_hint=float(hint))
        if "boundary_points" not in data:
            raise InstanceSpecError("expression instances need boundary_points")
        pts = _parse_points(data["boundary_points"], space.dim)
        inst = ProblemInstance(
            space=space, f=oracle, boundary_points=pts,
            label=str(data.get("label", "instance")),
        )
    else:
        raise InstanceSpecError("function section needs catalog_id or expression")

    cfg_fields = data.get("config", {})
    if not isinstance(cfg_fields, dict):
        raise InstanceSpecError("config section must be an object")
    known = {f.name for f in dataclasses.fields(NumericConfig)}
    unknown = set(cfg_fields) - known
    if unknown:
        raise InstanceSpecError(f"unknown config fields: {sorted(unknown)}")
    try:
        cfg = NumericConfig(**cfg_fields)
    except (TypeError, ValueError) as exc:
        raise InstanceSpecError(f"bad config: {exc}") from exc
    return inst, cfg, entry


def load_instance_file(path: str | Path) -> tuple[ProblemInstance, NumericConfig, catalog.CatalogEntry | None]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InstanceSpecError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InstanceSpecError(f"invalid JSON in {path}: {exc}") from exc
    return parse_instance(data)
