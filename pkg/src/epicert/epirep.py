"""Local epigraph representation of a level set at a nondegenerate boundary point.

Given a boundary point x of M = {f <= 0} and a descent witness (v, alpha),
this module extracts the remaining data: a radius r on which the descent
inequality survives sampling, a Lipschitz constant k for f near x, the
neighbourhood size epsilon, a norming functional phi (phi(v)=1, dual norm 1),
the split y = pi(y) + phi(y) v, and the ray-crossing function lambda.  The
product is a certificate stating that near x, membership in M is equivalent
to lying on one side of the graph of a Lipschitz function over ker phi.

lambda(y) is the infimum of {t : y + t v in M}; it satisfies
lambda(y + s v) = lambda(y) - s, vanishes on the boundary, and M coincides
locally with {lambda <= 0}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .clarke import (
    GradientHull,
    NondegeneracyResult,
    is_nondegenerate,
    local_lipschitz_constant,
)
from .core import (
    Direction,
    FunctionOracle,
    Membership,
    NormedSpace,
    NumericConfig,
    ProblemInstance,
    internal_verify_seed,
    membership,
    sample_ball,
    to_jsonable,
)

if TYPE_CHECKING:
    from .verify import VerificationReport

__all__ = [
    "RadiusUnderflow",
    "BracketViolation",
    "CylinderError",
    "epsilon_formula",
    "DescentWitness",
    "NormingFunctional",
    "norming_functional",
    "find_descent_radius",
    "to_graph_coordinates",
    "from_graph_coordinates",
    "lambda_values",
    "lambda_eval",
    "sample_cylinder",
    "measured_cylinder_lipschitz",
    "EpigraphCertificate",
    "CertificationFailure",
    "certificate_from_json",
    "certify",
]


class RadiusUnderflow(RuntimeError):
    """Descent radius search shrank past its floor; witness unusable."""


class BracketViolation(RuntimeError):
    """A guaranteed sign bracket for the ray bisection failed.

    The construction proves f > 0 at distance r/4 against the descent
    direction and f < 0 at r/4 along it, for any base point within epsilon
    of x.  Observing otherwise means (r, k, epsilon) were mis-certified and
    the certificate must be revoked.
    """


class CylinderError(ValueError):
    """Query point outside both the lambda cylinder and B(x, epsilon)."""


def epsilon_formula(alpha: float, r: float, k: float) -> float:
    """Neighbourhood size for the representation.  Single source of truth:

    builder and verifier both call this, so the stored value is reproducible
    bit for bit.
    """
    return min(r / 4.0, (alpha * r) / (4.0 * k))


@dataclass(frozen=True, eq=False)
class DescentWitness:
    """Everything extracted at x before the lemma-level checks."""

    x: np.ndarray
    v: np.ndarray          # unit descent direction
    alpha: float
    r: float
    k: float
    epsilon: float

    def validate(self, space: NormedSpace) -> None:
        if not (self.alpha > 0 and self.r > 0 and self.k > 0):
            raise ValueError("alpha, r, k must be positive")
        n = float(space.norm(self.v))
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"witness direction not unit: |v| = {n}")
        if self.epsilon != epsilon_formula(self.alpha, self.r, self.k):
            raise ValueError("epsilon does not match its defining formula")

    @staticmethod
    def assemble(
        space: NormedSpace, x: np.ndarray, v: np.ndarray,
        alpha: float, r: float, k: float,
    ) -> "DescentWitness":
        w = DescentWitness(
            x=np.asarray(x, dtype=float),
            v=np.asarray(v, dtype=float),
            alpha=float(alpha), r=float(r), k=float(k),
            epsilon=epsilon_formula(float(alpha), float(r), float(k)),
        )
        w.validate(space)
        return w


@dataclass(frozen=True, eq=False)
class NormingFunctional:
    """Linear functional phi(y) = <weights, y> with phi(v)=1, dual norm 1."""

    weights: np.ndarray
    dual_norm: float

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.weights


def norming_functional(space: NormedSpace, v: np.ndarray) -> NormingFunctional:
    """Explicit dual-norming functional for the supported norms.

    euclidean: phi = <v, .> (self-dual).  sup norm: phi picks the maximal
    coordinate of v (lowest index on ties), signed.  one norm: phi is the
    componentwise sign vector of v.  In each case phi(v) = |v| = 1 and the
    dual norm of the weights is 1, which is what the splitting needs.
    """
    v = np.asarray(v, dtype=float)
    if space.norm_kind == "euclidean":
        w = v.copy()
    elif space.norm_kind == "sup":
        j = int(np.argmax(np.abs(v)))
        w = np.zeros(space.dim)
        w[j] = 1.0 if v[j] >= 0 else -1.0
    else:
        w = np.sign(v)
    phi = NormingFunctional(weights=w, dual_norm=float(space.dual_norm(w)))
    val = float(w @ v)
    if abs(val - 1.0) > 1e-12 or abs(phi.dual_norm - 1.0) > 1e-10:
        raise ValueError(
            f"norming functional failed: phi(v)={val}, dual={phi.dual_norm}"
        )
    return phi


def find_descent_radius(
    space: NormedSpace,
    f: FunctionOracle,
    x: np.ndarray,
    v: np.ndarray,
    alpha: float,
    cfg: NumericConfig,
    *,
    r0: float = 1.0,
    t_min_fraction: float = 1e-4,
    seed_tag: str = "radius",
) -> float:
    """Largest grid radius on which the sampled descent inequality holds.

    Tests (f(y + t v) - f(y))/t < -alpha for y in B(x, 2r) and signed steps
    |t| up to 2r; negative t is probed directly rather than by the formal
    reduction to positive t.  Any observed violation shrinks r.  A quarter
    of the step sizes is drawn log-uniformly so small-|t| behaviour near the
    kink set is covered as well as full-length chords.
    """
    x = np.asarray(x, dtype=float)
    u = Direction.make(space, v).coords
    rng = cfg.rng(seed_tag, f.descriptor, *np.round(x, 12).tolist())
    n = max(256, cfg.sample_budget // 2)
    r = float(r0)
    floor = 1e-8 * r0
    while True:
        ys = sample_ball(space, x, 2.0 * r, n, rng)
        n_log = n // 4
        mag = np.empty(n)
        mag[: n - n_log] = rng.uniform(t_min_fraction, 1.0, n - n_log)
        mag[n - n_log :] = np.exp(rng.uniform(math.log(t_min_fraction), 0.0, n_log))
        ts = 2.0 * r * mag * rng.choice([-1.0, 1.0], n)
        quotients = (f.values(ys + ts[:, None] * u[None, :]) - f.values(ys)) / ts
        if np.all(quotients < -alpha):
            return r
        r *= cfg.shrink_factor
        if r < floor:
            raise RadiusUnderflow(
                f"descent radius fell below {floor:g}; witness numerically unusable"
            )


def to_graph_coordinates(
    phi: NormingFunctional, v: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Split y into (component in ker phi, height along v)."""
    y = np.asarray(y, dtype=float)
    t = phi(y)
    xi = y - np.multiply.outer(t, v)
    return xi, t


def from_graph_coordinates(v: np.ndarray, xi: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Inverse of the split: xi + t v."""
    return np.asarray(xi, dtype=float) + np.multiply.outer(np.asarray(t, dtype=float), v)


def _bisect_roots(
    f: FunctionOracle,
    bases: np.ndarray,
    v: np.ndarray,
    half_width: float,
    tol: float,
) -> np.ndarray:
    """Vectorised sign bisection of s -> f(base + s v) on [-w, +w].

    Assumes f(base - w v) > 0 and f(base + w v) <= 0 (checked by callers).
    """
    n = bases.shape[0]
    lo = np.full(n, -half_width)
    hi = np.full(n, half_width)
    iters = max(1, math.ceil(math.log2(max(2.0 * half_width / tol, 2.0))))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = f.values(bases + mid[:, None] * v[None, :])
        neg = g <= 0.0
        hi = np.where(neg, mid, hi)
        lo = np.where(neg, lo, mid)
    return 0.5 * (lo + hi)


def lambda_values(
    space: NormedSpace,
    f: FunctionOracle,
    witness: DescentWitness,
    phi: NormingFunctional,
    Y: np.ndarray,
    cfg: NumericConfig,
) -> np.ndarray:
    """Ray infimum lambda(y) = inf{t : y + t v in M} for a batch of points.

    A point qualifies either through the cylinder (its ker-phi part within
    epsilon of x's) or by lying in B(x, epsilon) outright; the second case
    matters for sup/one norms, where the projection can expand.  Cylinder
    points are first translated along v to x's phi-level, which keeps the
    bisection base inside B(x, epsilon) no matter how far along v the query
    sits.  The proof-level sign guarantees at +-r/4 are asserted; violations
    raise rather than degrade.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    x, v, r, eps = witness.x, witness.v, witness.r, witness.epsilon
    piY, phiY = to_graph_coordinates(phi, v, Y)
    pix, phix = to_graph_coordinates(phi, v, x)
    dF = np.asarray(space.norm(piY - pix[None, :]), dtype=float)
    direct_dist = np.asarray(space.norm(Y - x[None, :]), dtype=float)

    in_cyl = dF < eps
    in_ball = direct_dist < eps
    bad = ~(in_cyl | in_ball)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise CylinderError(
            f"point {Y[i].tolist()} outside cylinder (dF={dF[i]:.3g}) "
            f"and outside B(x, {eps:.3g})"
        )

    # translate cylinder points to x's level; direct-path points stay put
    shift = np.where(in_cyl, float(phix) - phiY, 0.0)
    bases = Y + shift[:, None] * v[None, :]

    w = r / 4.0
    f_lo = f.values(bases - w * v[None, :])
    f_hi = f.values(bases + w * v[None, :])
    if not (np.all(f_lo > 0.0) and np.all(f_hi < 0.0)):
        i = int(np.argmax(~((f_lo > 0.0) & (f_hi < 0.0))))
        raise BracketViolation(
            f"sign bracket failed at base {bases[i].tolist()}: "
            f"f(-r/4)={f_lo[i]:.6g}, f(+r/4)={f_hi[i]:.6g}"
        )
    roots = _bisect_roots(f, bases, v, w, cfg.tol_bisect)
    return roots + shift


def lambda_eval(
    space: NormedSpace,
    f: FunctionOracle,
    witness: DescentWitness,
    phi: NormingFunctional,
    y: np.ndarray,
    cfg: NumericConfig,
) -> float:
    """Scalar convenience wrapper over lambda_values."""
    return float(
        lambda_values(space, f, witness, phi, np.asarray(y, dtype=float)[None, :], cfg)[0]
    )


def sample_cylinder(
    space: NormedSpace,
    witness: DescentWitness,
    phi: NormingFunctional,
    n: int,
    rng: np.random.Generator,
    *,
    tau_halfwidth: float,
    margin: float = 0.98,
) -> np.ndarray:
    """n points with ker-phi part within margin*epsilon of x and height
    within tau_halfwidth of x's level.  Rejection-sampled so the cylinder
    precondition of lambda_values holds with slack.
    """
    x, v, eps = witness.x, witness.v, witness.epsilon
    pix, phix = to_graph_coordinates(phi, v, x)
    zero = np.zeros(space.dim)
    collected: list[np.ndarray] = []
    got = 0
    for _ in range(200):
        u = sample_ball(space, zero, eps, max(2 * n, 64), rng)
        xi = u - np.multiply.outer(phi(u), v)
        keep = np.asarray(space.norm(xi), dtype=float) < margin * eps
        xi = xi[keep]
        if xi.shape[0]:
            collected.append(xi)
            got += xi.shape[0]
        if got >= n:
            break
    if got < n:
        raise RuntimeError("cylinder rejection sampling starved")
    xis = np.concatenate(collected)[:n]
    taus = rng.uniform(-tau_halfwidth, tau_halfwidth, n)
    return pix[None, :] + xis + (float(phix) + taus)[:, None] * v[None, :]


def measured_cylinder_lipschitz(
    space: NormedSpace,
    f: FunctionOracle,
    witness: DescentWitness,
    phi: NormingFunctional,
    cfg: NumericConfig,
    n_pairs: int = 500,
    seed_tag: str = "measured-lipschitz",
) -> float:
    """Max sampled quotient |lambda(z)-lambda(y)|/|z-y| over cylinder pairs.

    Mix of pair types: unconstrained, along v (where the quotient is exactly
    1 by the translation identity), and pure ker-phi displacements (where
    the graph function's own modulus shows).
    """
    r, eps, v = witness.r, witness.epsilon, witness.v
    rng = cfg.rng(seed_tag, f.descriptor)
    n_free = n_pairs // 2
    n_v = n_pairs // 4
    n_flat = n_pairs - n_free - n_v

    A = sample_cylinder(space, witness, phi, n_free + n_v + n_flat, rng,
                        tau_halfwidth=r / 8.0)
    B = np.empty_like(A)
    B[:n_free] = sample_cylinder(space, witness, phi, n_free, rng,
                                 tau_halfwidth=r / 8.0)
    s = rng.uniform(1e-3 * r, r / 8.0, n_v) * rng.choice([-1.0, 1.0], n_v)
    B[n_free : n_free + n_v] = A[n_free : n_free + n_v] + s[:, None] * v[None, :]
    flat = sample_cylinder(space, witness, phi, n_flat, rng, tau_halfwidth=r / 8.0)
    # keep the height of A, take the ker-phi part of a fresh draw
    xiF, _ = to_graph_coordinates(phi, v, flat)
    xiA, tA = to_graph_coordinates(phi, v, A[n_free + n_v :])
    B[n_free + n_v :] = from_graph_coordinates(v, xiF, tA)

    lamA = lambda_values(space, f, witness, phi, A, cfg)
    lamB = lambda_values(space, f, witness, phi, B, cfg)
    sep = np.asarray(space.norm(A - B), dtype=float)
    ok = sep > 1e-6 * eps
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(lamA[ok] - lamB[ok]) / sep[ok]))


@dataclass(frozen=True, eq=False)
class EpigraphCertificate:
    """The artifact's statement that M is locally an epigraph at witness.x."""

    witness: DescentWitness
    phi: NormingFunctional
    lambda_samples: tuple[tuple[np.ndarray, float], ...]
    lipschitz_bound: float                 # 1 + 2k/alpha
    measured_lipschitz: float
    report: "VerificationReport | None"
    confidence: str
    seed: int
    instance_label: str
    instance_descriptor: str
    space: NormedSpace

    def to_json_dict(self) -> dict:
        w = self.witness
        return {
            "instance": {
                "label": self.instance_label,
                "descriptor": self.instance_descriptor,
                "dim": self.space.dim,
                "norm": self.space.norm_kind,
            },
            "x": to_jsonable(w.x),
            "v": to_jsonable(w.v),
            "alpha": w.alpha,
            "r": w.r,
            "k": w.k,
            "epsilon": w.epsilon,
            "phi_weights": to_jsonable(self.phi.weights),
            "lipschitz_bound": self.lipschitz_bound,
            "measured_lipschitz": self.measured_lipschitz,
            "lambda_samples": [
                {"point": to_jsonable(p), "value": val} for p, val in self.lambda_samples
            ],
            "lemma_report": (
                None if self.report is None else self.report.to_json_dict()["per_lemma"]
            ),
            "overall": None if self.report is None else self.report.overall,
            "confidence": self.confidence,
            "seed": self.seed,
        }


def certificate_from_json(data: dict) -> EpigraphCertificate:
    """Rebuild a certificate from its JSON form.

    Values are taken as stored, without revalidation; the verification suite
    is the place where a tampered field turns into a reported failure rather
    than a parse error.
    """
    info = data["instance"]
    space = NormedSpace(int(info["dim"]), str(info["norm"]))
    w = DescentWitness(
        x=np.asarray(data["x"], dtype=float),
        v=np.asarray(data["v"], dtype=float),
        alpha=float(data["alpha"]),
        r=float(data["r"]),
        k=float(data["k"]),
        epsilon=float(data["epsilon"]),
    )
    weights = np.asarray(data["phi_weights"], dtype=float)
    phi = NormingFunctional(weights=weights, dual_norm=float(space.dual_norm(weights)))
    samples = tuple(
        (np.asarray(s["point"], dtype=float), float(s["value"]))
        for s in data.get("lambda_samples", [])
    )
    return EpigraphCertificate(
        witness=w,
        phi=phi,
        lambda_samples=samples,
        lipschitz_bound=float(data["lipschitz_bound"]),
        measured_lipschitz=float(data["measured_lipschitz"]),
        report=None,
        confidence=str(data.get("confidence", "sampling_probabilistic")),
        seed=int(data["seed"]),
        instance_label=str(info.get("label", "")),
        instance_descriptor=str(info.get("descriptor", "")),
        space=space,
    )


@dataclass(frozen=True, eq=False)
class CertificationFailure:
    stage: str          # precondition | degenerate-point | radius-underflow | lemma-check-failure
    message: str
    hull: GradientHull | None = None
    nondegeneracy: NondegeneracyResult | None = None
    report: "VerificationReport | None" = None

    def to_json_dict(self) -> dict:
        out = {"failure": self.stage, "message": self.message}
        if self.hull is not None:
            out["hull_min_norm_value"] = self.hull.min_norm_value
        if self.report is not None:
            out["lemma_report"] = self.report.to_json_dict()["per_lemma"]
        return out


def certify(
    inst: ProblemInstance,
    x: np.ndarray,
    cfg: NumericConfig,
    *,
    r0: float = 1.0,
    t_min_fraction: float = 1e-4,
    chord_fraction: float = 1e-4,
    n_lambda_samples: int = 256,
    dd_overrides: dict | None = None,
    include_signed_distance: bool = False,
) -> EpigraphCertificate | CertificationFailure:
    """Full pipeline: witness -> radius -> Lipschitz -> epsilon -> phi ->
    lambda samples -> lemma suite.  Returns a certificate only when every
    lemma check passes on an independently derived verification seed.
    """
    from .verify import run_suite  # late import, verify depends on this module

    space = inst.space
    x = np.asarray(x, dtype=float)
    state = membership(inst.f, x, cfg)
    if state is not Membership.BOUNDARY_BAND:
        return CertificationFailure(
            stage="precondition",
            message=f"x is {state.value}, not in the boundary band "
                    f"(f(x) = {inst.f.value(x):.6g})",
        )

    nd = is_nondegenerate(inst, x, cfg, **(dd_overrides or {}))
    if nd.witness is None:
        msg = "no descent direction found"
        if nd.degenerate:
            msg += f"; hull min-norm {nd.hull.min_norm_value:.3g} agrees (degenerate point)"
        elif nd.note:
            msg += f"; {nd.note}"
        return CertificationFailure(
            stage="degenerate-point", message=msg, hull=nd.hull, nondegeneracy=nd,
        )
    v = nd.witness.coords
    alpha = float(nd.alpha)

    try:
        r = find_descent_radius(
            space, inst.f, x, v, alpha, cfg, r0=r0, t_min_fraction=t_min_fraction
        )
    except RadiusUnderflow as exc:
        return CertificationFailure(
            stage="radius-underflow", message=str(exc), hull=nd.hull, nondegeneracy=nd,
        )

    lip = local_lipschitz_constant(
        space, inst.f, x, r, cfg, chord_fraction=chord_fraction
    )
    witness = DescentWitness.assemble(space, x, v, alpha, r, lip.value)
    phi = norming_functional(space, v)

    # stored graph samples: keep the height slab thin so every stored value
    # obeys the |lambda| <= r/4 certificate invariant with slack
    rng = cfg.rng("lambda-samples", inst.f.descriptor)
    try:
        pts = sample_cylinder(
            space, witness, phi, n_lambda_samples, rng,
            tau_halfwidth=witness.r / 256.0,
        )
        lam = lambda_values(space, inst.f, witness, phi, pts, cfg)
        measured = measured_cylinder_lipschitz(space, inst.f, witness, phi, cfg)
    except (BracketViolation, CylinderError) as exc:
        return CertificationFailure(
            stage="lemma-check-failure", message=f"sampling stage: {exc}",
            hull=nd.hull, nondegeneracy=nd,
        )

    cert = EpigraphCertificate(
        witness=witness,
        phi=phi,
        lambda_samples=tuple((p, float(l)) for p, l in zip(pts, lam)),
        lipschitz_bound=1.0 + 2.0 * witness.k / witness.alpha,
        measured_lipschitz=measured,
        report=None,
        confidence="sampling_probabilistic",
        seed=cfg.rng_seed,
        instance_label=inst.label,
        instance_descriptor=inst.f.descriptor,
        space=space,
    )
    verify_cfg = replace(cfg, rng_seed=internal_verify_seed(cfg.rng_seed))
    report = run_suite(inst, cert, verify_cfg,
                       include_signed_distance=include_signed_distance)
    cert = replace(cert, report=report)
    if not report.overall:
        failed = [lid for lid, c in report.per_lemma.items() if not c.passed]
        return CertificationFailure(
            stage="lemma-check-failure",
            message=f"lemma checks failed: {', '.join(failed)}",
            hull=nd.hull, nondegeneracy=nd, report=report,
        )
    return cert
