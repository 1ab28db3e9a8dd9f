"""Property-test suite for epigraph certificates.

Re-derives every certified claim on fresh samples: the ray-value bound (L1),
the translation identity (L2), boundary containment of ray crossings (L3),
the cylinder Lipschitz bound (L4), the sublevel characterisation on the
epsilon-ball (L5), and the graph/membership equivalence on the half-size
ball plus split-map invertibility (L6).  A pointedness diagnostic and an
optional signed-distance nondegeneracy check ride along without gating.

The suite refuses to run on the seed the certificate was built with; reusing
build samples would let an overfitted certificate check itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clarke import WITNESS_TOL, GradientHull, estimate_gradient_hull
from .core import (
    NumericConfig,
    ProblemInstance,
    membership_codes,
    sample_ball,
)
from .epirep import (
    BracketViolation,
    CylinderError,
    EpigraphCertificate,
    epsilon_formula,
    from_graph_coordinates,
    lambda_values,
    measured_cylinder_lipschitz,
    sample_cylinder,
    to_graph_coordinates,
)

__all__ = [
    "SeedReuseError",
    "LemmaCheck",
    "VerificationReport",
    "pointedness_margin",
    "run_suite",
    "CHECK_SAMPLE_COUNTS",
]

# sample counts are part of the reporting contract, not tunables
CHECK_SAMPLE_COUNTS = {"L1": 200, "L2": 200, "L3": 200, "L4": 500, "L5": 500, "L6": 1000}

_GATING = ("L1", "L2", "L3", "L4", "L5", "L6")


class SeedReuseError(ValueError):
    """Verification seed equals the certificate's build seed."""


@dataclass(frozen=True)
class LemmaCheck:
    lemma_id: str
    passed: bool
    margin: float        # signed slack against the asserted bound
    samples: int
    tolerance: float
    note: str = ""

    def to_json_dict(self) -> dict:
        return {
            "pass": self.passed,
            "margin": self.margin,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "note": self.note,
        }


@dataclass(frozen=True, eq=False)
class VerificationReport:
    per_lemma: dict[str, LemmaCheck]
    overall: bool
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "per_lemma": {k: c.to_json_dict() for k, c in sorted(self.per_lemma.items())},
            "overall": self.overall,
            "seed": self.seed,
        }

    def table(self) -> str:
        rows = ["id           pass  margin        samples  tolerance"]
        for key in sorted(self.per_lemma):
            c = self.per_lemma[key]
            rows.append(
                f"{key:<12} {'ok' if c.passed else 'FAIL':<5} "
                f"{c.margin:<13.4g} {c.samples:<8d} {c.tolerance:.3g}"
                + (f"  {c.note}" if c.note else "")
            )
        rows.append(f"overall: {'pass' if self.overall else 'FAIL'}")
        return "\n".join(rows)


def pointedness_margin(hull: GradientHull) -> float:
    """min over generator pairs (g, h) of |g/|g| + h/|h||, euclidean.

    Near-zero means the generated cone contains a line.  Degenerate (near
    zero-norm) generators collapse the margin to 0 outright.  Diagnostic
    only; never gates a certificate.
    """
    gens = np.atleast_2d(np.asarray(hull.generators, dtype=float))
    norms = np.linalg.norm(gens, axis=1)
    if np.any(norms <= 1e-14):
        return 0.0
    unit = gens / norms[:, None]
    best = np.inf
    for i in range(unit.shape[0]):
        sums = unit[i : i + 1] + unit[i:]
        best = min(best, float(np.min(np.linalg.norm(sums, axis=1))))
    return best


def _failed(lemma_id: str, samples: int, tolerance: float, note: str) -> LemmaCheck:
    return LemmaCheck(lemma_id, False, -1.0, samples, tolerance, note)


def _structural_problems(inst: ProblemInstance, cert: EpigraphCertificate,
                         cfg: NumericConfig) -> list[str]:
    w = cert.witness
    space = inst.space
    problems = []
    if not (w.alpha > 0 and w.r > 0 and w.k > 0):
        problems.append("nonpositive alpha/r/k")
    if abs(float(space.norm(w.v)) - 1.0) > 1e-12:
        problems.append("witness direction not unit")
    if w.epsilon != epsilon_formula(w.alpha, w.r, w.k):
        problems.append(
            f"epsilon {w.epsilon!r} != min(r/4, alpha*r/(4k)) "
            f"= {epsilon_formula(w.alpha, w.r, w.k)!r}"
        )
    if abs(float(cert.phi.weights @ w.v) - 1.0) > 1e-12:
        problems.append("phi(v) != 1")
    if abs(float(space.dual_norm(cert.phi.weights)) - 1.0) > 1e-10:
        problems.append("phi dual norm != 1")
    expected_bound = 1.0 + 2.0 * w.k / w.alpha
    if not np.isclose(cert.lipschitz_bound, expected_bound, rtol=1e-12, atol=0.0):
        problems.append("lipschitz_bound != 1 + 2k/alpha")
    if cert.measured_lipschitz > cert.lipschitz_bound * 1.01:
        problems.append("measured_lipschitz exceeds bound * 1.01")
    lam_cap = w.r / 4.0 + cfg.tol_bisect
    for _, val in cert.lambda_samples:
        if abs(val) > lam_cap:
            problems.append(f"stored lambda sample {val:.6g} exceeds r/4 bound")
            break
    return problems


def run_suite(
    inst: ProblemInstance,
    cert: EpigraphCertificate,
    cfg: NumericConfig,
    *,
    include_signed_distance: bool = False,
) -> VerificationReport:
    """Evaluate all lemma checks against fresh samples drawn from cfg's seed."""
    if cfg.rng_seed == cert.seed:
        raise SeedReuseError(
            f"verification seed {cfg.rng_seed} equals the certificate build seed; "
            "re-verify with an independent seed"
        )
    space = inst.space
    f = inst.f
    w = cert.witness
    phi = cert.phi
    x, v, r, eps, k, alpha = w.x, w.v, w.r, w.epsilon, w.k, w.alpha
    noise = f.value_noise
    checks: dict[str, LemmaCheck] = {}

    problems = _structural_problems(inst, cert, cfg)
    if problems:
        checks["L1"] = _failed("L1", 0, cfg.tol_bisect,
                               "structural: " + "; ".join(problems))
    else:
        n = CHECK_SAMPLE_COUNTS["L1"]
        try:
            Y = sample_ball(space, x, eps, n, cfg.rng("verify", "L1"))
            lam = lambda_values(space, f, w, phi, Y, cfg)
            bound = r / 4.0 + cfg.tol_bisect
            worst = float(np.max(np.abs(lam)))
            checks["L1"] = LemmaCheck("L1", worst <= bound, bound - worst, n,
                                      cfg.tol_bisect)
        except (BracketViolation, CylinderError) as exc:
            checks["L1"] = _failed("L1", n, cfg.tol_bisect, str(exc))

    n = CHECK_SAMPLE_COUNTS["L2"]
    try:
        rng = cfg.rng("verify", "L2")
        pts = sample_cylinder(space, w, phi, n, rng, tau_halfwidth=r / 8.0)
        s = rng.uniform(-r / 4.0, r / 4.0, n)
        lamA = lambda_values(space, f, w, phi, pts, cfg)
        lamB = lambda_values(space, f, w, phi, pts + s[:, None] * v[None, :], cfg)
        err = float(np.max(np.abs(lamB - (lamA - s))))
        bound = 2.0 * cfg.tol_bisect
        checks["L2"] = LemmaCheck("L2", err <= bound, bound - err, n, bound)
    except (BracketViolation, CylinderError) as exc:
        checks["L2"] = _failed("L2", n, 2.0 * cfg.tol_bisect, str(exc))

    n = CHECK_SAMPLE_COUNTS["L3"]
    try:
        pts = sample_cylinder(space, w, phi, n, cfg.rng("verify", "L3"),
                              tau_halfwidth=r / 8.0)
        lam = lambda_values(space, f, w, phi, pts, cfg)
        crossings = pts + lam[:, None] * v[None, :]
        dist_slack = (r / 2.0 + cfg.tol_bisect) - float(np.max(space.norm(crossings - x)))
        value_cap = k * cfg.tol_bisect + 2.0 * noise
        value_slack = value_cap - float(np.max(np.abs(f.values(crossings))))
        margin = min(dist_slack, value_slack)
        checks["L3"] = LemmaCheck(
            "L3", margin >= 0.0, margin, n, cfg.tol_bisect,
            note=f"distance slack {dist_slack:.3g}, residual slack {value_slack:.3g}",
        )
    except (BracketViolation, CylinderError) as exc:
        checks["L3"] = _failed("L3", n, cfg.tol_bisect, str(exc))

    n = CHECK_SAMPLE_COUNTS["L4"]
    try:
        maxq = measured_cylinder_lipschitz(space, f, w, phi, cfg, n_pairs=n,
                                           seed_tag="verify-L4")
        bound = 1.01 * cert.lipschitz_bound
        checks["L4"] = LemmaCheck("L4", maxq <= bound, bound - maxq, n, 0.01)
    except (BracketViolation, CylinderError) as exc:
        checks["L4"] = _failed("L4", n, 0.01, str(exc))

    n = CHECK_SAMPLE_COUNTS["L5"]
    try:
        Y = sample_ball(space, x, eps, n, cfg.rng("verify", "L5"))
        codes = membership_codes(f, Y, cfg)
        keep = codes != 0
        lam = lambda_values(space, f, w, phi, Y[keep], cfg)
        inside = codes[keep] < 0
        agree = inside == (lam <= 0.0)
        if bool(np.all(agree)):
            margin = float(np.min(np.abs(lam))) if lam.size else cfg.tol_value
            passed = True
        else:
            margin = -float(np.max(np.abs(lam[~agree])))
            passed = False
        checks["L5"] = LemmaCheck(
            "L5", passed, margin, int(np.sum(keep)), cfg.tol_value,
            note=f"{int(np.sum(~agree))} disagreements",
        )
    except (BracketViolation, CylinderError) as exc:
        checks["L5"] = _failed("L5", n, cfg.tol_value, str(exc))

    n = CHECK_SAMPLE_COUNTS["L6"]
    try:
        Y = sample_ball(space, x, eps / 2.0, n, cfg.rng("verify", "L6"))
        codes = membership_codes(f, Y, cfg)
        keep = codes != 0
        xiY, phiY = to_graph_coordinates(phi, v, Y)
        lam_pi = lambda_values(space, f, w, phi, xiY[keep], cfg)
        gap = phiY[keep] - lam_pi          # >= 0 iff the split puts y above the graph
        inside = codes[keep] < 0
        agree = inside == (gap >= 0.0)
        Z = sample_ball(space, x, r / 2.0, 100, cfg.rng("verify", "L6-invert"))
        xiZ, tZ = to_graph_coordinates(phi, v, Z)
        inv_err = float(np.max(space.norm(from_graph_coordinates(v, xiZ, tZ) - Z)))
        inv_ok = inv_err <= 1e-12
        if bool(np.all(agree)) and inv_ok:
            margin = float(np.min(np.abs(gap))) if gap.size else cfg.tol_value
            passed = True
        else:
            passed = False
            margin = (-float(np.max(np.abs(gap[~agree])))
                      if not bool(np.all(agree)) else -inv_err)
        checks["L6"] = LemmaCheck(
            "L6", passed, margin, int(np.sum(keep)), cfg.tol_value,
            note=f"{int(np.sum(~agree))} disagreements; "
                 f"split-map round trip max error {inv_err:.2e}",
        )
    except (BracketViolation, CylinderError) as exc:
        checks["L6"] = _failed("L6", n, cfg.tol_value, str(exc))

    hull = estimate_gradient_hull(space, f, x, cfg)
    pm = pointedness_margin(hull)
    checks["pointedness"] = LemmaCheck(
        "pointedness", True, pm, hull.generators.shape[0], 0.0,
        note="diagnostic only; near 0 suggests the generated cone is not pointed",
    )

    if include_signed_distance:
        from .signed_distance import check_theorem2  # heavy import kept lazy

        t2 = check_theorem2(inst, x, cfg)
        checks["T2"] = LemmaCheck(
            "T2", t2.nondegenerate,
            t2.alpha if t2.alpha is not None else -1.0,
            t2.directions_tried, WITNESS_TOL,
            note=t2.note,
        )

    overall = all(checks[i].passed for i in _GATING if i in checks)
    return VerificationReport(per_lemma=checks, overall=overall, seed=cfg.rng_seed)
