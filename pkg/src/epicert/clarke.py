"""Sampling estimators for generalized derivatives of Lipschitz functions.

Three pieces:

* ``directional_derivative``: the generalized directional derivative at x in
  direction v, estimated as a max of difference quotients over a ladder of
  shrinking neighbourhoods.  Positively homogeneous in v by construction
  (the direction is normalised internally and the result rescaled).
* ``estimate_gradient_hull`` / ``min_norm_point``: a surrogate for the
  generalized gradient, built as the convex hull of gradients sampled at
  nearby points, with Wolfe's algorithm for the minimum-norm point.
* ``local_lipschitz_constant``: a certified-by-sampling bound on the local
  Lipschitz constant of f on a ball, every candidate being an honest pair
  quotient |f(a) - f(b)| / |a - b|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Direction,
    FunctionOracle,
    NormedSpace,
    NumericConfig,
    ProblemInstance,
    sample_ball,
)

__all__ = [
    "DirectionalDerivativeEstimate",
    "directional_derivative",
    "min_norm_point",
    "GradientHull",
    "estimate_gradient_hull",
    "NondegeneracyResult",
    "is_nondegenerate",
    "LipschitzEstimate",
    "local_lipschitz_constant",
    "WITNESS_TOL",
    "HULL_ZERO_TOL",
    "SAFETY",
]

WITNESS_TOL = 1e-6     # a direction counts as descending only below this
HULL_ZERO_TOL = 1e-3   # hull min-norm below this reads as 0 in the hull
SAFETY = 1.25          # inflation applied to raw sampled Lipschitz quotients


@dataclass(frozen=True)
class DirectionalDerivativeEstimate:
    value: float                   # final-level max quotient (the estimate)
    upper_bound_confidence: float  # max quotient across all levels, >= value
    samples_used: int
    delta_final: float
    stabilized: bool        # consecutive levels agreed before hitting the floor


def directional_derivative(
    space: NormedSpace,
    f: FunctionOracle,
    x: np.ndarray,
    v: np.ndarray,
    cfg: NumericConfig,
    *,
    delta0: float | None = None,
    delta_floor: float | None = None,
    stab_tol: float | None = None,
    seed_tag: str = "dirderiv",
) -> DirectionalDerivativeEstimate:
    """Estimate the generalized directional derivative of f at x along v.

    At neighbourhood scale delta we draw base points y in B(x, delta) and
    steps t in [delta/4, delta], take the max of (f(y + t u) - f(y)) / t for
    the unit direction u, and shrink delta until two consecutive levels agree
    to stab_tol or the floor is reached.  The result is scaled by |v| so
    positive homogeneity holds exactly.
    """
    x = np.asarray(x, dtype=float)
    scale = 1.0 + float(space.norm(x))
    if delta0 is None:
        delta0 = 0.1 * scale
    if delta_floor is None:
        delta_floor = 1e-8 * scale
    if stab_tol is None:
        stab_tol = cfg.tol_value
    vnorm = float(space.norm(np.asarray(v, dtype=float)))
    u = Direction.make(space, v).coords

    n_per_level = max(16, cfg.sample_budget // 32)
    rng = cfg.rng(seed_tag, f.descriptor, *np.round(x, 12).tolist())

    delta = float(delta0)
    prev = None
    best_overall = -math.inf
    used = 0
    stabilized = False
    level_max = -math.inf
    while True:
        ys = sample_ball(space, x, delta, n_per_level, rng)
        ts = delta * rng.uniform(0.25, 1.0, n_per_level)
        vals0 = f.values(ys)
        vals1 = f.values(ys + ts[:, None] * u[None, :])
        quotients = (vals1 - vals0) / ts
        level_max = float(np.max(quotients))
        used += 2 * n_per_level
        best_overall = max(best_overall, level_max)
        if prev is not None and abs(level_max - prev) <= stab_tol:
            stabilized = True
            break
        if delta * cfg.shrink_factor < delta_floor or used >= cfg.sample_budget * 8:
            break
        prev = level_max
        delta *= cfg.shrink_factor

    return DirectionalDerivativeEstimate(
        value=level_max * vnorm,
        upper_bound_confidence=best_overall * vnorm,
        samples_used=used,
        delta_final=delta,
        stabilized=stabilized,
    )


def min_norm_point(
    points: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimum euclidean-norm point of conv(points) via Wolfe's method.

    Returns (point, weights); weights sum to 1 over the input rows, with the
    mass of duplicated rows assigned to their first occurrence.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    if m == 0:
        raise ValueError("empty generator set")
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    first_occ = np.full(uniq.shape[0], -1, dtype=int)
    for i, ui in enumerate(inverse):
        if first_occ[ui] < 0:
            first_occ[ui] = i

    P = uniq
    start = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    active = [start]
    w = np.array([1.0])
    x = P[start].copy()

    for _ in range(max_iter):
        dots = P @ x
        xx = float(x @ x)
        j = int(np.argmin(dots))
        if dots[j] > xx - tol * max(1.0, xx):
            break
        if j in active:
            break  # numerically stuck, current x is as good as it gets
        active.append(j)
        w = np.append(w, 0.0)
        # minor cycles: affine minimiser over the active set, then pull the
        # weights back into the simplex, dropping vanished generators
        while True:
            S = P[active]
            k = len(active)
            G = S @ S.T
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = 2.0 * G
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            u = sol[:k]
            if np.all(u > 1e-12):
                w = u
                x = u @ S
                break
            mask = u <= 1e-12
            denom = w - u
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(mask & (denom > 1e-300), w / denom, np.inf)
            theta = float(np.min(ratios))
            theta = min(max(theta, 0.0), 1.0)
            w = (1.0 - theta) * w + theta * u
            w[w < 1e-12] = 0.0
            keep = w > 0.0
            if not np.any(keep):
                keep[int(np.argmax(u))] = True
                w[keep] = 1.0
            active = [a for a, k_ in zip(active, keep) if k_]
            w = w[keep]
            w = w / w.sum()
            x = w @ P[active]
            if len(active) == 1:
                break

    weights_full = np.zeros(m)
    acc = np.zeros(uniq.shape[0])
    for a, wi in zip(active, w):
        acc[a] += wi
    for ui, orig in enumerate(first_occ):
        weights_full[orig] = acc[ui]
    return x, weights_full


@dataclass(frozen=True, eq=False)
class GradientHull:
    """Convex hull of sampled nearby gradients, with its min-norm point."""

    generators: np.ndarray       # (m, dim)
    min_norm_point: np.ndarray   # (dim,)
    min_norm_value: float        # euclidean norm of the min-norm point
    weights: np.ndarray          # (m,) convex weights realising it


def estimate_gradient_hull(
    space: NormedSpace,
    f: FunctionOracle,
    x: np.ndarray,
    cfg: NumericConfig,
    *,
    perturbation: float | None = None,
    fd_step: float | None = None,
    seed_tag: str = "hull",
) -> GradientHull:
    """Gradients at points jittered around x, hulled.

    Axis perturbations catch piecewise structure aligned with coordinates;
    random directions cover the rest.  The jitter keeps samples off
    measure-zero kink sets almost surely.
    """
    x = np.asarray(x, dtype=float)
    d = space.dim
    scale = 1.0 + float(space.norm(x))
    if perturbation is None:
        perturbation = 1e-5 * scale
    if fd_step is None:
        fd_step = 1e-6 * scale
    rng = cfg.rng(seed_tag, f.descriptor, *np.round(x, 12).tolist())

    n_target = min(4 * d + 8, 48)
    dirs = []
    for j in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[j] = s
            dirs.append(e + 1e-3 * rng.standard_normal(d))
            if len(dirs) >= n_target:
                break
        if len(dirs) >= n_target:
            break
    while len(dirs) < n_target:
        g = rng.standard_normal(d)
        dirs.append(g / np.linalg.norm(g))
    D = np.stack(dirs)
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    pts = x[None, :] + perturbation * D
    grads = f.gradients(pts, fd_step=fd_step)
    mnp, weights = min_norm_point(grads)
    return GradientHull(
        generators=grads,
        min_norm_point=mnp,
        min_norm_value=float(np.linalg.norm(mnp)),
        weights=weights,
    )


@dataclass(frozen=True, eq=False)
class NondegeneracyResult:
    witness: Direction | None
    witness_value: float | None       # directional derivative along the witness
    alpha: float | None               # -witness_value / 2
    hull: GradientHull
    consistent: bool                  # witness search agrees with the hull test
    degenerate: bool
    directions_tried: int
    note: str = ""


def is_nondegenerate(
    inst: ProblemInstance,
    x: np.ndarray,
    cfg: NumericConfig,
    *,
    hull_perturbation: float | None = None,
    hull_fd_step: float | None = None,
    dd_delta0: float | None = None,
    dd_delta_floor: float | None = None,
    dd_stab_tol: float | None = None,
) -> NondegeneracyResult:
    """Search for a descent direction at a boundary point.

    A unit v with negative directional derivative certifies that 0 is not in
    the generalized gradient.  Candidates in order: the direction opposite
    the hull's min-norm point, the signed coordinate axes, then random unit
    vectors.  The hull verdict is kept alongside as a consistency check but
    the witness, when found, is what downstream consumes.
    """
    space = inst.space
    x = np.asarray(x, dtype=float)
    hull = estimate_gradient_hull(
        space, inst.f, x, cfg,
        perturbation=hull_perturbation, fd_step=hull_fd_step,
    )

    candidates: list[np.ndarray] = []
    if hull.min_norm_value > HULL_ZERO_TOL:
        candidates.append(-hull.min_norm_point)
    for j in range(space.dim):
        for s in (-1.0, 1.0):
            e = np.zeros(space.dim)
            e[j] = s
            candidates.append(e)
    rng = cfg.rng("witness-dirs", inst.f.descriptor, *np.round(x, 12).tolist())
    for _ in range(16):
        g = rng.standard_normal(space.dim)
        candidates.append(g)

    witness = None
    witness_value = None
    tried = 0
    for c in candidates:
        if float(space.norm(c)) < 1e-12:
            continue
        tried += 1
        # normalize first: the estimate scales with |v|, and alpha must refer
        # to the unit witness
        u = space.unit(c)
        est = directional_derivative(
            space, inst.f, x, u, cfg,
            delta0=dd_delta0, delta_floor=dd_delta_floor, stab_tol=dd_stab_tol,
        )
        if est.value < -WITNESS_TOL:
            witness = Direction.make(space, u)
            witness_value = est.value
            break

    hull_nonzero = hull.min_norm_value > HULL_ZERO_TOL
    consistent = (witness is not None) == hull_nonzero
    degenerate = witness is None and not hull_nonzero
    note = ""
    if not consistent:
        note = (
            f"hull min-norm {hull.min_norm_value:.3g} disagrees with witness "
            f"search ({'found' if witness is not None else 'none'})"
        )
    return NondegeneracyResult(
        witness=witness,
        witness_value=witness_value,
        alpha=None if witness_value is None else -witness_value / 2.0,
        hull=hull,
        consistent=consistent,
        degenerate=degenerate,
        directions_tried=tried,
        note=note,
    )


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float            # the bound the pipeline uses
    raw_max: float          # largest observed pair quotient
    n_quotients: int
    hint_inconsistent: bool # analytic hint fell below an observed quotient


def _chord_quotients(
    space: NormedSpace,
    f: FunctionOracle,
    bases: np.ndarray,
    dirs: np.ndarray,
    h: float,
) -> np.ndarray:
    a = bases + h * dirs
    b = bases - h * dirs
    sep = space.norm(a - b)
    ok = sep > 1e-300
    q = np.zeros(bases.shape[0])
    fa = f.values(a)
    fb = f.values(b)
    q[ok] = np.abs(fa[ok] - fb[ok]) / sep[ok]
    return q


def local_lipschitz_constant(
    space: NormedSpace,
    f: FunctionOracle,
    center: np.ndarray,
    radius: float,
    cfg: NumericConfig,
    *,
    chord_fraction: float = 1e-4,
    seed_tag: str = "lipschitz",
) -> LipschitzEstimate:
    """Lipschitz bound for f on the closed ball B(center, radius).

    Candidate quotients come from four honest sources: random point pairs,
    short central chords at random points, chords aimed along the dual
    norming direction of the local gradient, and a few gradient-growth
    ascent runs that chase the in-ball maximiser of the dual gradient norm.
    The returned value inflates the raw max by a fixed safety factor unless
    a consistent analytic hint caps it.
    """
    center = np.asarray(center, dtype=float)
    rng = cfg.rng(seed_tag, f.descriptor, round(radius, 12))
    d = space.dim
    n_q = 0
    raw = 0.0

    n_pairs = 512
    A = sample_ball(space, center, radius, n_pairs, rng)
    B = sample_ball(space, center, radius, n_pairs, rng)
    sep = space.norm(A - B)
    ok = sep > 1e-9 * radius
    if np.any(ok):
        qa = np.abs(f.values(A[ok]) - f.values(B[ok])) / sep[ok]
        raw = max(raw, float(np.max(qa)))
        n_q += int(np.sum(ok))

    h = chord_fraction * radius
    n_chord = 128
    bases = sample_ball(space, center, radius * (1.0 - 2.0 * chord_fraction), n_chord, rng)
    if space.norm_kind == "euclidean":
        U = rng.standard_normal((n_chord, d))
        U /= np.maximum(np.linalg.norm(U, axis=1, keepdims=True), 1e-300)
    else:
        U = rng.uniform(-1.0, 1.0, (n_chord, d))
        U /= np.maximum(space.norm(U)[:, None], 1e-300)
    q = _chord_quotients(space, f, bases, U, h)
    raw = max(raw, float(np.max(q)))
    n_q += n_chord

    # chords along the steepest direction each local gradient allows
    grads = f.gradients(bases, fd_step=max(1e-7, 1e-6 * radius))
    gnorm = np.linalg.norm(grads, axis=1)
    live = gnorm > 1e-12
    if np.any(live):
        W = np.stack([space.dual_norming_direction(g) for g in grads[live]])
        q = _chord_quotients(space, f, bases[live], W, h)
        raw = max(raw, float(np.max(q)))
        n_q += int(np.sum(live))

    # ascent on the dual gradient norm: move toward the shell point that the
    # gradient's directional growth suggests, recording a chord each step.
    # needed in higher dimension where random sampling undershoots the sup.
    fd = max(1e-7, 1e-6 * radius)
    hv_step = 1e-4 * radius
    T = max(60, 2 * d)
    for _ in range(4):
        g0 = rng.standard_normal(d)
        p = center + 0.999 * radius * space.unit(g0)
        prev_dir = None
        for _ in range(T):
            g = f.gradients(p[None, :], fd_step=fd)[0]
            if np.linalg.norm(g) > 1e-12:
                u = space.dual_norming_direction(g)
                base = center + (p - center) * (1.0 - 2.0 * chord_fraction)
                qv = _chord_quotients(space, f, base[None, :], u[None, :], h)
                raw = max(raw, float(qv[0]))
                n_q += 1
            else:
                u = space.unit(rng.standard_normal(d))
            gp = f.gradients((p + hv_step * u)[None, :], fd_step=fd)[0]
            gm = f.gradients((p - hv_step * u)[None, :], fd_step=fd)[0]
            hv = (gp - gm) / (2.0 * hv_step)
            if np.linalg.norm(hv) < 1e-12:
                break
            if prev_dir is not None and float(hv @ prev_dir) < 0.0:
                hv = -hv
            prev_dir = hv
            p_new = center + 0.999 * radius * space.unit(hv)
            if np.linalg.norm(p_new - p) < 1e-12 * (1.0 + radius):
                p = p_new
                break
            p = p_new

    hint_inconsistent = False
    hint = f.lipschitz_hint
    if hint is not None and hint >= raw * (1.0 - 1e-9):
        value = min(float(hint), SAFETY * raw) if raw > 0 else float(hint)
    else:
        if hint is not None:
            hint_inconsistent = True
        value = SAFETY * raw
    return LipschitzEstimate(
        value=value, raw_max=raw, n_quotients=n_q, hint_inconsistent=hint_inconsistent
    )
