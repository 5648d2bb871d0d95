"""Regularization-parameter choice rules and the discrepancy principle.

Three closed-form admissibility rules bound the regularization parameter in
terms of the noise level delta, the Lipschitz-type coefficient kappa of the
reconstruction, the domain volume, the dynamic functional K (built from the
smallest interior gradient magnitude), and a gradient-operator Lipschitz
constant L.  Because K and kappa depend on the solution the rule selects, a
damped fixed-point iteration closes the circle.  A classical bisection on
the discrepancy provides an independent baseline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import Grid, ScalarField, grad_mag_arrays, holder_coefficient
from .operators import LinearOperator, operator_norm, power_iteration
from .rng import POWER_ITERATION_SEED, SplitMix64
from .solvers import Objective, SolveOptions, SolveResult, solve

__all__ = [
    "RULE_KINDS",
    "RuleInputs",
    "AdmissibilityReport",
    "K_of",
    "lipschitz_L",
    "alpha_rule1",
    "alpha_rule2",
    "alpha_rule3",
    "tau_of",
    "admissibility_check",
    "FixedPointAlphaResult",
    "fixed_point_alpha",
    "MorozovResult",
    "morozov_bisection",
]

# Long names mirror what each rule scales with; short names are CLI spellings.
RULE_KINDS = {
    "rule1": "rule1_delta_sq",
    "rule2": "rule2_delta_sq_lipschitz",
    "rule3": "rule3_delta",
    "morozov": "morozov_bisection",
}


@dataclass(frozen=True)
class RuleInputs:
    """Everything the closed-form alpha rules consume."""

    delta: float
    kappa: float
    volume: float
    K_value: float
    L_value: float = 1.0
    T_adjoint_norm: float = 1.0

    def __post_init__(self):
        for name in ("delta", "kappa", "volume", "K_value", "L_value",
                     "T_adjoint_norm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class AdmissibilityReport:
    """Discrepancy versus the tau*delta bound."""

    tau: float
    discrepancy: float
    bound: float
    satisfied: bool
    margin: float


def K_of(phi: ScalarField, beta: float) -> float:
    """Dynamic coefficient 1/sqrt(U + beta), U the least interior |grad|^2.

    Only interior points count: the last slice along each axis carries the
    zeroed forward-difference components, which are artifacts of the
    replicated boundary.
    """
    if not (beta > 0.0):
        raise ValueError(f"beta must be > 0, got {beta}")
    gm = grad_mag_arrays(phi.values, phi.grid.spacing)
    interior = tuple(slice(0, n - 1) for n in phi.grid.shape)
    u_min = float(np.min(gm[interior]))
    return 1.0 / math.sqrt(u_min * u_min + beta)


def lipschitz_L(grid: Grid, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Operator norm of the discrete gradient, by power iteration on G^T G.

    A grid-uniform bound: ||grad(u - v)|| <= L ||u - v|| for every pair on
    the grid.  It grows like 1/h under mesh refinement.
    """
    from .fields import div_arrays, grad_arrays

    def matvec(x):
        return -div_arrays(grad_arrays(x, grid.spacing), grid.spacing)

    x0 = SplitMix64(POWER_ITERATION_SEED).normal(grid.npoints).reshape(grid.shape)
    lam, _, _, residual = power_iteration(matvec, x0, tol, max_iter)
    if residual >= tol:
        warnings.warn(
            f"gradient-norm power iteration stopped at residual {residual:.3e}",
            stacklevel=2,
        )
    return math.sqrt(max(lam, 0.0))


def alpha_rule1(inputs: RuleInputs) -> float:
    """delta^2 scaling: the largest admissible alpha without a Lipschitz term."""
    return (
        inputs.delta**2
        * (1.0 / inputs.K_value)
        / (2.0 * inputs.kappa**2 * inputs.volume**2)
    )


def alpha_rule2(inputs: RuleInputs) -> float:
    """Rule 1 divided by the Lipschitz constant L."""
    if not (inputs.L_value > 0.0):
        raise ValueError(f"L_value must be > 0, got {inputs.L_value}")
    return alpha_rule1(inputs) / inputs.L_value


def alpha_rule3(inputs: RuleInputs) -> float:
    """delta^1 scaling of rule 2; intended for small delta."""
    if not (inputs.L_value > 0.0):
        raise ValueError(f"L_value must be > 0, got {inputs.L_value}")
    if not (0.0 < inputs.delta < 1.0):
        warnings.warn(
            f"delta = {inputs.delta} outside (0, 1); the delta-linear rule is "
            "meant for small noise levels",
            stacklevel=2,
        )
    return (
        inputs.delta
        * (1.0 / inputs.K_value)
        / (2.0 * inputs.kappa**2 * inputs.volume**2)
    ) / inputs.L_value


_RULES = {"rule1": alpha_rule1, "rule2": alpha_rule2, "rule3": alpha_rule3}


def tau_of(T_adjoint_norm: float) -> float:
    """tau = sqrt(3/2 + ||T*||); always at least one."""
    if T_adjoint_norm < 0.0:
        raise ValueError(f"operator norm must be >= 0, got {T_adjoint_norm}")
    return math.sqrt(1.5 + T_adjoint_norm)


def admissibility_check(
    T: LinearOperator,
    phi_alpha: ScalarField,
    f_delta: ScalarField,
    delta: float,
    tau: float,
) -> AdmissibilityReport:
    """Check the discrepancy ||T phi - f|| against tau * delta."""
    if tau < 1.0:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    residual = T.apply(phi_alpha)
    diff = residual.values - f_delta.values
    discrepancy = float(
        np.sqrt(np.sum(diff * diff) * T.range_grid.quad_weight)
    )
    bound = tau * delta
    return AdmissibilityReport(
        tau=tau,
        discrepancy=discrepancy,
        bound=bound,
        satisfied=discrepancy <= bound,
        margin=bound - discrepancy,
    )


@dataclass
class FixedPointAlphaResult:
    alpha: float
    phi_alpha: ScalarField
    alpha_trace: list
    converged: bool
    inputs: RuleInputs
    solve_result: SolveResult


def fixed_point_alpha(
    T: LinearOperator,
    f_delta: ScalarField,
    beta: float,
    rule: str,
    delta: float,
    opts: SolveOptions = None,
    kappa: float = None,
    omega: float = 0.5,
    fp_tol: float = 1e-3,
    max_rounds: int = 20,
) -> FixedPointAlphaResult:
    """Resolve the circular dependence of the rules on their own solution.

    K (and kappa, when not supplied) are recomputed from the current
    reconstruction; the next alpha is the damped average
    (1 - omega) * alpha + omega * rule_bound.  The start value uses the
    worst-case K = beta^(-1/2) (a vanishing interior gradient).  Stops at
    relative alpha change below fp_tol or after max_rounds, whichever first;
    the returned reconstruction is re-solved at the final alpha.
    """
    if rule not in _RULES:
        raise ValueError(f"rule must be one of {sorted(_RULES)}, got {rule!r}")
    if not (delta > 0.0):
        raise ValueError(f"delta must be > 0, got {delta}")
    opts = opts if opts is not None else SolveOptions()
    grid = T.domain_grid
    volume = grid.volume
    L = lipschitz_L(grid)
    t_norm = operator_norm(T).value

    def bound_for(phi):
        kap = kappa if kappa is not None else float(holder_coefficient(phi, 1.0))
        if kap <= 0.0:  # constant phi: no Lipschitz information, worst case 1
            kap = 1.0
        K = K_of(phi, beta)
        inputs = RuleInputs(delta=delta, kappa=kap, volume=volume, K_value=K,
                            L_value=L, T_adjoint_norm=t_norm)
        return _RULES[rule](inputs), inputs

    phi0 = ScalarField(grid, T.adjoint_array(f_delta.values))
    kap0 = kappa if kappa is not None else float(holder_coefficient(phi0, 1.0))
    if kap0 <= 0.0:
        kap0 = 1.0
    inputs0 = RuleInputs(delta=delta, kappa=kap0, volume=volume,
                         K_value=beta**-0.5, L_value=L, T_adjoint_norm=t_norm)
    alpha = _RULES[rule](inputs0)
    trace = [alpha]
    converged = False
    inputs = inputs0
    result = None
    for _ in range(max_rounds):
        result = solve(Objective(T, f_delta, alpha, beta), opts)
        bound, inputs = bound_for(result.phi_alpha)
        alpha_next = (1.0 - omega) * alpha + omega * bound
        trace.append(alpha_next)
        if abs(alpha_next - alpha) / alpha < fp_tol:
            alpha = alpha_next
            converged = True
            break
        alpha = alpha_next
    result = solve(Objective(T, f_delta, alpha, beta), opts)
    return FixedPointAlphaResult(
        alpha=alpha,
        phi_alpha=result.phi_alpha,
        alpha_trace=trace,
        converged=converged,
        inputs=inputs,
        solve_result=result,
    )


@dataclass
class MorozovResult:
    alpha: float
    phi_alpha: ScalarField
    iterations: int
    discrepancy: float
    degenerate: bool
    solve_result: SolveResult


def morozov_bisection(
    T: LinearOperator,
    f_delta: ScalarField,
    beta: float,
    delta: float,
    tau: float,
    opts: SolveOptions = None,
    alpha_lo: float = 1e-12,
    alpha_hi: float = 1e4,
    max_rounds: int = 50,
) -> MorozovResult:
    """Bisection on log(alpha) until the discrepancy lands in [delta, tau*delta].

    Requires a bracket: discrepancy below delta at alpha_lo and above
    tau*delta at alpha_hi.  If even alpha_hi stays admissible the instance is
    over-noised (alpha unbounded above) and is reported as degenerate.
    """
    if tau < 1.0:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if not (delta > 0.0):
        raise ValueError(f"delta must be > 0, got {delta}")
    opts = opts if opts is not None else SolveOptions()

    def run(alpha):
        res = solve(Objective(T, f_delta, alpha, beta), opts)
        return res, res.discrepancy

    res_hi, disc_hi = run(alpha_hi)
    if disc_hi <= tau * delta:
        return MorozovResult(alpha=alpha_hi, phi_alpha=res_hi.phi_alpha,
                             iterations=1, discrepancy=disc_hi,
                             degenerate=True, solve_result=res_hi)
    res_lo, disc_lo = run(alpha_lo)
    if disc_lo > tau * delta:
        raise ValueError(
            "discrepancy not bracketed: "
            f"{disc_lo:.6e} > tau*delta = {tau * delta:.6e} at alpha = {alpha_lo:g}"
        )
    iterations = 2
    best = (alpha_lo, res_lo, disc_lo)
    if delta <= disc_lo:  # already inside the band at the lower end
        return MorozovResult(alpha=alpha_lo, phi_alpha=res_lo.phi_alpha,
                             iterations=iterations, discrepancy=disc_lo,
                             degenerate=False, solve_result=res_lo)
    lo, hi = alpha_lo, alpha_hi
    for _ in range(max_rounds):
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi)))
        res_mid, disc_mid = run(mid)
        iterations += 1
        if disc_mid <= tau * delta and mid > best[0]:
            best = (mid, res_mid, disc_mid)
        if disc_mid < delta:
            lo = mid
        elif disc_mid > tau * delta:
            hi = mid
        else:
            return MorozovResult(alpha=mid, phi_alpha=res_mid.phi_alpha,
                                 iterations=iterations, discrepancy=disc_mid,
                                 degenerate=False, solve_result=res_mid)
    alpha, res, disc = best
    return MorozovResult(alpha=alpha, phi_alpha=res.phi_alpha,
                         iterations=iterations, discrepancy=disc,
                         degenerate=False, solve_result=res)
