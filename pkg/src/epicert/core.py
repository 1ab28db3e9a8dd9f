"""Shared numeric primitives: normed spaces, function oracles, sampling, config.

Everything downstream works against the small vocabulary defined here.  A
function oracle is batch-first (an (n, dim) array of points maps to (n,)
values) because the certification pipeline lives or dies on vectorised
evaluation.  Scalar convenience wrappers are provided but the batch form is
the contract.
"""

from __future__ import annotations

import enum
import json
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "NORM_KINDS",
    "DUAL_KIND",
    "stream_rng",
    "NormedSpace",
    "Direction",
    "FunctionOracle",
    "finite_difference_gradients",
    "NumericConfig",
    "Membership",
    "membership",
    "membership_codes",
    "ReferenceData",
    "ProblemInstance",
    "sample_ball",
    "to_jsonable",
    "canonical_json",
    "internal_verify_seed",
]

NORM_KINDS = ("euclidean", "sup", "one")

# Norming functionals for one norm live in the sup-norm dual ball and vice
# versa; euclidean is self-dual.
DUAL_KIND = {"euclidean": "euclidean", "sup": "one", "one": "sup"}


def stream_rng(seed: int, *labels: Any) -> np.random.Generator:
    """Deterministic named substream of a base seed.

    Labels are hashed so that e.g. ("radius", 3) and ("lipschitz",) never
    collide and adding a new consumer does not shift any existing stream.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for label in labels:
        entropy.append(zlib.crc32(str(label).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class NormedSpace:
    """Finite-dimensional real space with one of three norms."""

    dim: int
    norm_kind: str = "euclidean"

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.norm_kind not in NORM_KINDS:
            raise ValueError(f"unknown norm_kind {self.norm_kind!r}")

    def norm(self, y: np.ndarray) -> np.ndarray:
        """Norm of a point (dim,) or batch (n, dim); returns scalar or (n,)."""
        y = np.asarray(y, dtype=float)
        if self.norm_kind == "euclidean":
            return np.linalg.norm(y, axis=-1)
        if self.norm_kind == "sup":
            return np.max(np.abs(y), axis=-1)
        return np.sum(np.abs(y), axis=-1)

    def unit(self, y: np.ndarray) -> np.ndarray:
        """y rescaled to norm 1.  Raises on (numerically) zero input."""
        y = np.asarray(y, dtype=float)
        n = float(self.norm(y))
        if n < 1e-300:
            raise ValueError("cannot normalise zero vector")
        u = y / n
        # kill -0.0 so serialised directions are reproducible byte for byte
        return np.where(u == 0.0, 0.0, u)

    def dual_norm(self, w: np.ndarray) -> np.ndarray:
        return NormedSpace(self.dim, DUAL_KIND[self.norm_kind]).norm(w)

    def dual_norming_direction(self, g: np.ndarray) -> np.ndarray:
        """A unit vector u (this space's norm) with <g, u> = dual_norm(g).

        Used to aim chord probes along the steepest direction a gradient
        allows.  Ties in the sup/one cases resolve to the lowest index.
        """
        g = np.asarray(g, dtype=float)
        if self.norm_kind == "euclidean":
            return self.unit(g)
        if self.norm_kind == "sup":
            # dual of sup is one-norm: u has all coordinates at +-1
            s = np.sign(g)
            s = np.where(s == 0.0, 1.0, s)
            return s
        # dual of one-norm is sup: mass on a single extreme coordinate
        j = int(np.argmax(np.abs(g)))
        u = np.zeros(self.dim)
        u[j] = 1.0 if g[j] >= 0 else -1.0
        return u


@dataclass(frozen=True, eq=False)
class Direction:
    """Unit vector in a given space.  Construct via ``Direction.make``."""

    coords: np.ndarray
    unit_norm: float

    @staticmethod
    def make(space: NormedSpace, v: np.ndarray) -> "Direction":
        v = np.asarray(v, dtype=float)
        u = space.unit(v)
        n = float(space.norm(u))
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"normalisation failed, |v| = {n}")
        return Direction(coords=u, unit_norm=n)


def finite_difference_gradients(
    eval_fn: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    step: float,
) -> np.ndarray:
    """Central-difference gradients for a batch of points, (n, d) -> (n, d).

    One eval call of size 2*n*d; fine for the modest batches we use it on.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    eye = np.eye(d) * step
    plus = points[:, None, :] + eye[None, :, :]
    minus = points[:, None, :] - eye[None, :, :]
    stacked = np.concatenate([plus.reshape(n * d, d), minus.reshape(n * d, d)])
    vals = np.asarray(eval_fn(stacked), dtype=float)
    fp = vals[: n * d].reshape(n, d)
    fm = vals[n * d :].reshape(n, d)
    return (fp - fm) / (2.0 * step)


@dataclass(frozen=True, eq=False)
class FunctionOracle:
    """Locally Lipschitz function given by batch evaluation.

    eval: (n, dim) -> (n,).  grad, when present, is trusted only away from
    the nonsmooth locus; estimators that need derivatives at kink points use
    difference quotients instead.  lipschitz_hint, when present, is an
    analytic bound on the local Lipschitz constant near the region of
    interest and is cross-checked rather than believed outright.
    value_noise declares how far eval may sit from the ideal function it
    stands for (0 for closed forms; the probe resolution for estimated
    oracles); magnitude-sensitive checks add it to their tolerance.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz_hint: float | None = None
    descriptor: str = ""
    value_noise: float = 0.0

    def values(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.asarray(self.eval(points), dtype=float)
        if out.shape != (points.shape[0],):
            raise ValueError(
                f"oracle returned shape {out.shape}, expected ({points.shape[0]},)"
            )
        return out

    def value(self, point: np.ndarray) -> float:
        return float(self.values(np.asarray(point, dtype=float)[None, :])[0])

    def gradients(self, points: np.ndarray, fd_step: float = 1e-6) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.grad is not None:
            g = np.asarray(self.grad(points), dtype=float)
            if g.shape != points.shape:
                raise ValueError(f"grad returned shape {g.shape}")
            return g
        return finite_difference_gradients(self.values, points, fd_step)


@dataclass(frozen=True)
class NumericConfig:
    """Tolerances and budgets shared across the pipeline."""

    tol_bisect: float = 1e-10
    tol_value: float = 1e-9
    sample_budget: int = 4096
    shrink_factor: float = 0.5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.tol_bisect <= 0 or self.tol_value <= 0:
            raise ValueError("tolerances must be positive")
        if not (0 < self.shrink_factor < 1):
            raise ValueError("shrink_factor must be in (0, 1)")
        if self.sample_budget < 16:
            raise ValueError("sample_budget too small")

    def rng(self, *labels: Any) -> np.random.Generator:
        return stream_rng(self.rng_seed, *labels)


class Membership(enum.Enum):
    INSIDE = "inside"
    BOUNDARY_BAND = "boundary_band"
    OUTSIDE = "outside"


def membership_codes(f: FunctionOracle, points: np.ndarray, cfg: NumericConfig) -> np.ndarray:
    """-1 inside, 0 within the value tolerance band, +1 outside (int8)."""
    vals = f.values(points)
    out = np.zeros(vals.shape, dtype=np.int8)
    out[vals <= -cfg.tol_value] = -1
    out[vals >= cfg.tol_value] = 1
    return out


def membership(f: FunctionOracle, point: np.ndarray, cfg: NumericConfig) -> Membership:
    code = int(membership_codes(f, np.asarray(point, dtype=float)[None, :], cfg)[0])
    if code < 0:
        return Membership.INSIDE
    if code > 0:
        return Membership.OUTSIDE
    return Membership.BOUNDARY_BAND


@dataclass(frozen=True, eq=False)
class ReferenceData:
    """Optional analytic ground truth attached to a catalog entry.

    Only ever consumed by tests and diagnostics; the certification pipeline
    itself must work from the oracle alone.
    """

    witness_point: np.ndarray | None = None
    witness_direction: np.ndarray | None = None
    directional_derivative_at_witness: float | None = None
    # per boundary point: (point, closed form (Y, v) -> crossing heights for
    # descent direction v), used to cross-check bisection output against the
    # direction actually certified
    lambda_forms: tuple[tuple[np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray]], ...] = ()
    subdifferential: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    lipschitz_on_ball: Callable[[float], float] | None = None
    smooth_points: tuple[np.ndarray, ...] = ()
    notes: str = ""

    def _lookup(self, table, point: np.ndarray, atol: float):
        p = np.asarray(point, dtype=float)
        for where, payload in table:
            if np.allclose(where, p, atol=atol):
                return payload
        return None

    def subdifferential_at(self, point: np.ndarray, atol: float = 1e-9) -> np.ndarray | None:
        got = self._lookup(self.subdifferential, point, atol)
        return None if got is None else np.asarray(got, dtype=float)

    def lambda_form_at(self, point: np.ndarray, atol: float = 1e-9) -> Callable[[np.ndarray, np.ndarray], np.ndarray] | None:
        return self._lookup(self.lambda_forms, point, atol)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A set M = {f <= 0} in a normed space, plus boundary points of interest."""

    space: NormedSpace
    f: FunctionOracle
    boundary_points: tuple[np.ndarray, ...] = ()
    reference: ReferenceData | None = None
    label: str = ""

    def __post_init__(self) -> None:
        for p in self.boundary_points:
            if np.asarray(p).shape != (self.space.dim,):
                raise ValueError(f"boundary point shape {np.asarray(p).shape}")


def sample_ball(
    space: NormedSpace,
    center: np.ndarray,
    radius: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """n points of the open ball B(center, radius), center first.

    The tail of the batch (about one eighth) is pushed out near the shell,
    norms in (0.9, 1) times radius, because worst cases for Lipschitz and
    ray checks live near the boundary and plain uniform sampling in higher
    dimension rarely lands there under sup or one norms.
    """
    center = np.asarray(center, dtype=float)
    d = space.dim
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.empty((n, d))
    out[0] = center
    if n == 1:
        return out
    m = n - 1
    if space.norm_kind == "euclidean":
        g = rng.standard_normal((m, d))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        radii = rng.uniform(0.0, 1.0, m) ** (1.0 / d)
        pts = g * radii[:, None]
    elif space.norm_kind == "sup":
        pts = rng.uniform(-1.0, 1.0, (m, d))
    else:
        # one-norm ball: exponential trick gives uniform direction on the
        # cross-polytope, then a radial factor
        g = rng.exponential(1.0, (m, d)) * rng.choice([-1.0, 1.0], (m, d))
        g /= np.maximum(np.sum(np.abs(g), axis=1, keepdims=True), 1e-300)
        radii = rng.uniform(0.0, 1.0, m) ** (1.0 / d)
        pts = g * radii[:, None]
    pts *= 0.999  # keep strictly interior
    k = max(1, math.ceil(n / 8))
    k = min(k, m)
    shell = rng.uniform(0.901, 0.998, k)
    norms = space.norm(pts[-k:])
    norms = np.maximum(norms, 1e-300)
    pts[-k:] = pts[-k:] / norms[:, None] * shell[:, None]
    out[1:] = center + radius * pts
    return out


def to_jsonable(obj: Any) -> Any:
    """Recursively convert to plain JSON types.  ndarray -> list, float64 -> float."""
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            raise ValueError("non-finite float in JSON payload")
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        return to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Stable serialisation: sorted keys, no whitespace.  Same input, same bytes."""
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def internal_verify_seed(seed: int) -> int:
    """Derived seed for the self-check pass after certification.

    Must differ from the build seed (checked by the verifier) while staying a
    pure function of it so runs stay reproducible end to end.
    """
    mixed = (int(seed) * 6364136223846793005 + 1442695040888963407) % (2**63)
    if mixed == seed:
        mixed += 1
    return mixed
