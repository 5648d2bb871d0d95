"""Bregman machinery and numerical verification of the inequality corpus.

Each check evaluates both sides of one theorem-level inequality with the
package's own discrete operations and reports the slack.  Continuum
statements are checked on a grid, so each check carries the quantified
tolerance stated in its docstring: an absolute 1e-12 * scale term plus,
where boundary effects enter, an explicit discretization factor.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .fields import (
    ScalarField,
    geometry,
    grad_arrays,
    grad_mag_arrays,
    holder_coefficient,
    holder_norm,
    lp_norm,
    tv,
    smoothed_tv,
)
from .operators import LinearOperator, operator_norm
from .phantoms import noise_direction
from .rules import fixed_point_alpha, lipschitz_L, tau_of, K_of
from .solvers import SolveOptions

__all__ = [
    "BregmanReport",
    "bregman",
    "QConvexityProbe",
    "q_convexity_probe",
    "strong_convexity_modulus",
    "TheoremCheckReport",
    "check_holder_vs_tv",
    "check_grad_l1",
    "check_grad_l2_sq",
    "check_l1_embedding",
    "check_successive_tv",
    "check_lipschitz_successive_tv",
    "morrey_ratio",
    "morrey_exponent",
    "CorpusCheckRow",
    "corpus_checks",
    "SweepExperiment",
    "SweepResult",
    "delta_sweep",
]


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, ScalarField):
            h.update(np.ascontiguousarray(part.values).tobytes())
        else:
            h.update(repr(part).encode())
    return h.hexdigest()[:12]


# ---------------------------------------------------------------------------
# Bregman divergence and convexity probes


@dataclass(frozen=True)
class BregmanReport:
    """Bregman divergence of a pair together with the pair's norms.

    modulus_bound is the curvature lower bound of the integrand on the
    segment between the two arguments (1 for the half-squared-L2 case).
    """

    value: float
    lhs_pair_norm: float
    grad_pair_seminorm: float
    modulus_bound: float


def strong_convexity_modulus(beta: float, p_max: float) -> float:
    """Curvature floor beta / (p_max^2 + beta)^(3/2) of sqrt(p^2 + beta).

    This is the smallest eigenvalue of the integrand Hessian on gradient
    magnitudes up to p_max; it decreases strictly in p_max.
    """
    if not (beta > 0.0):
        raise ValueError(f"beta must be > 0, got {beta}")
    if p_max < 0.0:
        raise ValueError(f"p_max must be >= 0, got {p_max}")
    return beta / (p_max * p_max + beta) ** 1.5


def bregman(functional: str, u: ScalarField, v: ScalarField,
            beta: float = None) -> BregmanReport:
    """Bregman divergence Phi(u) - Phi(v) - <grad Phi(v), u - v>.

    For the smoothed TV the divergence is accumulated pointwise over the
    integrand (equivalent by the chain rule and exact adjointness, and free
    of the cancellation the functional-level formula suffers from): a pair
    differing by a constant yields exactly zero.
    """
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    grid = u.grid
    w = grid.quad_weight
    diff = u.values - v.values
    lhs_norm = float(np.sqrt(np.sum(diff * diff) * w))

    if functional == "half_sq_l2":
        gdiff = grad_arrays(diff, grid.spacing)
        seminorm = float(np.sqrt(np.sum(gdiff * gdiff) * w))
        value = float(0.5 * np.sum(diff * diff) * w)
        return BregmanReport(value=value, lhs_pair_norm=lhs_norm,
                             grad_pair_seminorm=seminorm, modulus_bound=1.0)

    if functional != "smoothed_tv":
        raise ValueError(
            f"functional must be 'smoothed_tv' or 'half_sq_l2', got {functional!r}"
        )
    if beta is None or not (beta > 0.0):
        raise ValueError(f"smoothed_tv needs beta > 0, got {beta}")
    gu = grad_arrays(u.values, grid.spacing)
    gv = grad_arrays(v.values, grid.spacing)
    gm_u2 = np.sum(gu * gu, axis=0)
    gm_v2 = np.sum(gv * gv, axis=0)
    au = np.sqrt(gm_u2 + beta)
    av = np.sqrt(gm_v2 + beta)
    pointwise = au - av - np.sum(gv * (gu - gv), axis=0) / av
    value = float(np.sum(pointwise) * w)
    gdiff = gu - gv
    seminorm = float(np.sqrt(np.sum(gdiff * gdiff) * w))
    p_max = math.sqrt(float(max(np.max(gm_u2), np.max(gm_v2))))
    return BregmanReport(value=value, lhs_pair_norm=lhs_norm,
                         grad_pair_seminorm=seminorm,
                         modulus_bound=strong_convexity_modulus(beta, p_max))


@dataclass(frozen=True)
class QConvexityProbe:
    """Empirical convexity moduli of the smoothed TV over a pair set.

    The L2 modulus is provably zero under constant shifts, so the gradient
    seminorm statistic is the informative one; pairs whose seminorm vanishes
    are excluded from it.
    """

    c_star_l2: float
    c_star_grad_seminorm: float
    argmin_l2: int
    argmin_grad_seminorm: int
    pairs_used_l2: int
    pairs_used_grad_seminorm: int


def q_convexity_probe(beta: float, pairs, q: float = 2.0) -> QConvexityProbe:
    """Infimum of D / ||u - v||^q over pairs, in both pairings."""
    if not pairs:
        raise ValueError("pair set must be nonempty")
    c_l2 = math.inf
    c_semi = math.inf
    arg_l2 = -1
    arg_semi = -1
    used_l2 = 0
    used_semi = 0
    for idx, (u, v) in enumerate(pairs):
        rep = bregman("smoothed_tv", u, v, beta=beta)
        if rep.lhs_pair_norm > 0.0:
            used_l2 += 1
            ratio = rep.value / rep.lhs_pair_norm**q
            if ratio < c_l2:
                c_l2, arg_l2 = ratio, idx
        if rep.grad_pair_seminorm > 0.0:
            used_semi += 1
            ratio = rep.value / rep.grad_pair_seminorm**q
            if ratio < c_semi:
                c_semi, arg_semi = ratio, idx
    return QConvexityProbe(
        c_star_l2=c_l2, c_star_grad_seminorm=c_semi,
        argmin_l2=arg_l2, argmin_grad_seminorm=arg_semi,
        pairs_used_l2=used_l2, pairs_used_grad_seminorm=used_semi,
    )


# ---------------------------------------------------------------------------
# theorem-level inequality checks


@dataclass(frozen=True)
class TheoremCheckReport:
    name: str
    lhs: float
    rhs: float
    passed: bool
    slack: float
    inputs_digest: str


def _report(name, lhs, rhs, digest) -> TheoremCheckReport:
    tol = 1e-12 * (1.0 + abs(lhs) + abs(rhs))
    return TheoremCheckReport(
        name=name, lhs=lhs, rhs=rhs, passed=lhs <= rhs + tol,
        slack=rhs - lhs, inputs_digest=digest,
    )


def morrey_exponent(dim: int) -> float:
    """Hoelder exponent 1 - dim/4 from the W^{1,4} embedding; 1/4 in 3D."""
    return 1.0 - dim / 4.0


def check_holder_vs_tv(phi: ScalarField) -> TheoremCheckReport:
    """Hoelder coefficient bounded by diameter^(1-gamma)/volume * TV.

    Uses the Morrey exponent for the grid dimension; the 2D case is an
    extension of the three-dimensional statement and is flagged in the name.
    """
    grid = phi.grid
    gam = morrey_exponent(grid.dim)
    geo = geometry(grid)
    lhs = float(holder_coefficient(phi, gam))
    rhs = geo.diameter ** (1.0 - gam) / geo.volume * tv(phi)
    name = "holder_vs_tv" if grid.dim == 3 else "holder_vs_tv(extended-2d)"
    return _report(name, lhs, rhs, _digest(phi, gam))


def check_grad_l1(phi: ScalarField) -> TheoremCheckReport:
    """TV bounded by kappa * volume, kappa the measured Lipschitz coefficient.

    The bound carries the factor (1 + 4 h_max / extent_min): forward
    differences sample the axes at staggered midpoints, so the discrete
    gradient magnitude can exceed the largest pairwise quotient by O(h).
    """
    grid = phi.grid
    kappa = float(holder_coefficient(phi, 1.0))
    factor = 1.0 + 4.0 * max(grid.spacing) / min(grid.extents)
    lhs = tv(phi)
    rhs = kappa * grid.volume * factor
    return _report("grad_l1_vs_kappa", lhs, rhs, _digest(phi))


def check_grad_l2_sq(phi: ScalarField) -> TheoremCheckReport:
    """Integrated squared gradient bounded by kappa^2 * volume^2."""
    grid = phi.grid
    kappa = float(holder_coefficient(phi, 1.0))
    gm = grad_mag_arrays(phi.values, grid.spacing)
    lhs = float(np.sum(gm * gm) * grid.quad_weight)
    rhs = kappa * kappa * grid.volume**2
    return _report("grad_l2_sq_vs_kappa", lhs, rhs, _digest(phi))


def check_l1_embedding(phi: ScalarField, gamma: float = None) -> TheoremCheckReport:
    """Chain holder_norm >= sup norm >= L1 norm / volume.

    Reported as mean-L1 against the Hoelder norm; the full three-way chain
    decides the pass flag.
    """
    grid = phi.grid
    if gamma is None:
        gamma = morrey_exponent(grid.dim)
    hnorm = holder_norm(phi, gamma)
    sup = lp_norm(phi, math.inf)
    mean_l1 = lp_norm(phi, 1) / grid.volume
    tol = 1e-12 * (1.0 + hnorm + sup + mean_l1)
    passed = (hnorm >= sup - tol) and (sup >= mean_l1 - tol)
    return TheoremCheckReport(
        name="l1_embedding", lhs=mean_l1, rhs=hnorm, passed=passed,
        slack=min(hnorm - sup, sup - mean_l1), inputs_digest=_digest(phi, gamma),
    )


def _pair_kappa(u: ScalarField, v: ScalarField) -> float:
    # the bound's proof applies the squared-gradient corollary to both
    # arguments; taking the larger coefficient keeps it valid for the pair
    return max(float(holder_coefficient(u, 1.0)), float(holder_coefficient(v, 1.0)))


def check_successive_tv(u: ScalarField, v: ScalarField,
                        beta: float) -> TheoremCheckReport:
    """J(u) - J(v) bounded by 2 kappa^2 volume^2 K(u) ||grad(u - v)||."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    grid = u.grid
    kappa = _pair_kappa(u, v)
    gdiff = grad_arrays(u.values - v.values, grid.spacing)
    seminorm = float(np.sqrt(np.sum(gdiff * gdiff) * grid.quad_weight))
    lhs = smoothed_tv(u, beta) - smoothed_tv(v, beta)
    rhs = 2.0 * kappa**2 * grid.volume**2 * K_of(u, beta) * seminorm
    return _report("successive_tv", lhs, rhs, _digest(u, v, beta))


def check_lipschitz_successive_tv(u: ScalarField, v: ScalarField,
                                  beta: float) -> TheoremCheckReport:
    """Successive-TV bound with ||grad(u-v)|| replaced by L ||u - v||."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    grid = u.grid
    kappa = _pair_kappa(u, v)
    diff = u.values - v.values
    pair_norm = float(np.sqrt(np.sum(diff * diff) * grid.quad_weight))
    L = lipschitz_L(grid)
    lhs = smoothed_tv(u, beta) - smoothed_tv(v, beta)
    rhs = 2.0 * kappa**2 * L * grid.volume**2 * K_of(u, beta) * pair_norm
    return _report("lipschitz_successive_tv", lhs, rhs, _digest(u, v, beta))


def morrey_ratio(phi: ScalarField) -> float:
    """Hoelder coefficient over the L4 norm of the gradient magnitude.

    The corpus maximum is an empirical lower bound on the (unknown) embedding
    constant; there is no pass/fail.  Undefined for constant fields.
    """
    grid = phi.grid
    gm = ScalarField(grid, grad_mag_arrays(phi.values, grid.spacing))
    denom = lp_norm(gm, 4)
    if denom == 0.0:
        raise ValueError("morrey ratio is undefined for constant fields")
    return float(holder_coefficient(phi, morrey_exponent(grid.dim))) / denom


@dataclass(frozen=True)
class CorpusCheckRow:
    """One verify-report line; data-only rows leave rhs/slack/passed unset."""

    check_name: str
    instance: str
    lhs: float
    rhs: float = None
    slack: float = None
    passed: bool = None


def corpus_checks(corpus, beta: float) -> list:
    """All single-field and paired checks over (name, field) instances.

    Pairs are consecutive instances on the same grid (cyclically within each
    grid group).  Morrey ratios are appended as data-only rows, followed by
    their corpus maximum.
    """
    rows = []
    for name, phi in corpus:
        for rep in (
            check_holder_vs_tv(phi),
            check_grad_l1(phi),
            check_grad_l2_sq(phi),
            check_l1_embedding(phi),
        ):
            rows.append(CorpusCheckRow(rep.name, name, rep.lhs, rep.rhs,
                                       rep.slack, rep.passed))
    groups = {}
    for name, phi in corpus:
        groups.setdefault(phi.grid, []).append((name, phi))
    for members in groups.values():
        if len(members) < 2:
            continue
        for i, (name_u, u) in enumerate(members):
            name_v, v = members[(i + 1) % len(members)]
            label = f"{name_u}|{name_v}"
            for rep in (check_successive_tv(u, v, beta),
                        check_lipschitz_successive_tv(u, v, beta)):
                rows.append(CorpusCheckRow(rep.name, label, rep.lhs, rep.rhs,
                                           rep.slack, rep.passed))
    ratios = []
    for name, phi in corpus:
        try:
            ratio = morrey_ratio(phi)
        except ValueError:
            continue
        ratios.append(ratio)
        rows.append(CorpusCheckRow("morrey_ratio", name, ratio))
    if ratios:
        rows.append(CorpusCheckRow("morrey_ratio_max", "corpus", max(ratios)))
    return rows


# ---------------------------------------------------------------------------
# noise-level sweep


@dataclass
class SweepExperiment:
    """A controlled reconstruction experiment over decreasing noise levels.

    deltas are absolute noise norms, strictly decreasing.  The noise
    direction is drawn once from the seed and rescaled per level, so errors
    vary with delta alone.  kappa = None measures the coefficient from each
    reconstruction; a float pins it (e.g. a phantom's analytic constant).
    """

    T: LinearOperator
    phi_true: ScalarField
    deltas: tuple
    rule: str = "rule3"
    beta: float = 1e-2
    seed: int = 0
    opts: SolveOptions = None
    kappa: float = None


@dataclass
class SweepResult:
    deltas: tuple
    errors: list
    discrepancies: list
    alphas: list
    margins: list  # tau*delta - discrepancy, one per level
    fitted_slope: float
    predicted_constant: float  # 1/2 + ||T*||
    tau: float
    completed: bool


def delta_sweep(exp: SweepExperiment) -> SweepResult:
    """Reconstruct across noise levels and fit the error-decay slope.

    For each delta: exact-norm noise, rule-chosen alpha (fixed-point mode),
    solve, then record the reconstruction error and the discrepancy margin
    against tau * delta with tau = sqrt(3/2 + ||T*||).  The slope is the
    least-squares fit of log error against log delta.  A non-convergent
    inner solve aborts the sweep, returning the completed prefix flagged.
    """
    deltas = tuple(float(d) for d in exp.deltas)
    if any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError(f"deltas must be strictly decreasing, got {deltas}")
    if any(d <= 0.0 for d in deltas):
        raise ValueError(f"deltas must be positive, got {deltas}")
    if exp.phi_true.grid != exp.T.domain_grid:
        raise ValueError("true field is not on the operator's domain grid")
    opts = exp.opts if exp.opts is not None else SolveOptions()
    grid = exp.T.domain_grid
    w = grid.quad_weight
    f_true = exp.T.apply(exp.phi_true)
    direction = noise_direction(exp.T.range_grid, exp.seed)
    t_norm = operator_norm(exp.T).value
    tau = tau_of(t_norm)

    errors, discrepancies, alphas, margins = [], [], [], []
    completed = True
    for delta in deltas:
        f_delta = ScalarField(exp.T.range_grid,
                              f_true.values + delta * direction.values)
        fp = fixed_point_alpha(exp.T, f_delta, exp.beta, exp.rule, delta,
                               opts=opts, kappa=exp.kappa)
        if not fp.solve_result.converged:
            completed = False
            break
        diff = fp.phi_alpha.values - exp.phi_true.values
        errors.append(float(np.sqrt(np.sum(diff * diff) * w)))
        discrepancies.append(fp.solve_result.discrepancy)
        alphas.append(fp.alpha)
        margins.append(tau * delta - fp.solve_result.discrepancy)

    if len(errors) >= 2:
        logs_d = np.log(np.asarray(deltas[: len(errors)]))
        logs_e = np.log(np.asarray(errors))
        slope = float(np.polyfit(logs_d, logs_e, 1)[0])
    else:
        slope = math.nan
    return SweepResult(
        deltas=deltas[: len(errors)],
        errors=errors,
        discrepancies=discrepancies,
        alphas=alphas,
        margins=margins,
        fitted_slope=slope,
        predicted_constant=0.5 + t_norm,
        tau=tau,
        completed=completed,
    )
