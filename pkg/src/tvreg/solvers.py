"""Minimization of the smoothed-TV regularized least-squares objective.

The objective is F(phi) = 1/2 ||T phi - f||^2 + alpha * J_beta(phi) with
J_beta the smoothed total variation.  Two solvers are provided and cross
checked: monotone gradient descent with Armijo backtracking, and the lagged
diffusivity fixed-point iteration, which freezes the diffusion coefficient
1/sqrt(|grad phi_k|^2 + beta) and solves the resulting symmetric positive
semi-definite linear system by conjugate gradients each outer step.  The
fixed point of the lagged iteration is exactly the stationary point of F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np

from .fields import (
    Grid,
    ScalarField,
    div_arrays,
    grad_arrays,
    grad_mag_arrays,
)
from .operators import LinearOperator, operator_norm, power_iteration
from .rng import POWER_ITERATION_SEED, SplitMix64

__all__ = [
    "Objective",
    "SolveOptions",
    "SolveResult",
    "LaggedConditionReport",
    "objective_value",
    "smoothed_tv_gradient",
    "objective_gradient",
    "optimality_residual",
    "solve",
    "solve_gradient_descent",
    "solve_lagged_diffusivity",
    "lagged_condition_check",
]

ARMIJO_C1 = 1e-4
MIN_STEP = 1e-16


@dataclass
class Objective:
    """Data-misfit plus smoothed-TV objective bundle (T, f_delta, alpha, beta)."""

    T: LinearOperator
    f_delta: ScalarField
    alpha: float
    beta: float

    def __post_init__(self):
        if self.f_delta.grid != self.T.range_grid:
            raise ValueError("data field is not on the operator's range grid")
        if not (self.alpha > 0.0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (self.beta > 0.0):
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass
class SolveOptions:
    method: str = "lagged_diffusivity"
    grad_tol: float = 1e-8
    max_outer: int = 2000
    cg_tol: float = 1e-12
    cg_max: int = 5000
    initial: object = "adjoint"  # ScalarField, "adjoint" (T* f) or "zero"

    def __post_init__(self):
        if self.method not in ("gradient_descent", "lagged_diffusivity"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.grad_tol > 0.0 and self.cg_tol > 0.0):
            raise ValueError("tolerances must be positive")


@dataclass
class SolveResult:
    phi_alpha: ScalarField
    objective_trace: list
    grad_norm: float
    discrepancy: float
    optimality_residual: float
    outer_iterations: int
    converged: bool
    method: str
    message: str = ""
    settings: dict = dc_field(default_factory=dict)


# ---------------------------------------------------------------------------
# array-level evaluations shared by both solvers


def _objective_arrays(obj: Objective, vals: np.ndarray) -> float:
    r = obj.T.apply_array(vals) - obj.f_delta.values
    data = 0.5 * np.sum(r * r) * obj.T.range_grid.quad_weight
    gm = grad_mag_arrays(vals, obj.T.domain_grid.spacing)
    smoothed = np.sum(np.sqrt(gm * gm + obj.beta)) * obj.T.domain_grid.quad_weight
    return float(data + obj.alpha * smoothed)


def _smoothed_tv_grad_arrays(vals: np.ndarray, spacing, beta: float) -> np.ndarray:
    g = grad_arrays(vals, spacing)
    denom = np.sqrt(np.sum(g * g, axis=0) + beta)
    return -div_arrays(g / denom, spacing)


def _objective_grad_arrays(obj: Objective, vals: np.ndarray) -> np.ndarray:
    residual = obj.T.apply_array(vals) - obj.f_delta.values
    out = obj.T.adjoint_array(residual)
    out += obj.alpha * _smoothed_tv_grad_arrays(
        vals, obj.T.domain_grid.spacing, obj.beta
    )
    return out


def _weighted_norm(vals: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.sum(vals * vals) * grid.quad_weight))


def _discrepancy(obj: Objective, vals: np.ndarray) -> float:
    r = obj.T.apply_array(vals) - obj.f_delta.values
    return _weighted_norm(r, obj.T.range_grid)


def _initial_values(obj: Objective, opts: SolveOptions) -> np.ndarray:
    if isinstance(opts.initial, ScalarField):
        if opts.initial.grid != obj.T.domain_grid:
            raise ValueError("initial field is not on the operator's domain grid")
        return opts.initial.values.copy()
    if opts.initial == "adjoint":
        return obj.T.adjoint_array(obj.f_delta.values)
    if opts.initial == "zero":
        return np.zeros(obj.T.domain_grid.shape)
    raise ValueError(f"unknown initial {opts.initial!r}")


# ---------------------------------------------------------------------------
# public evaluations


def objective_value(obj: Objective, phi: ScalarField) -> float:
    """F(phi) = 1/2 ||T phi - f||^2 + alpha * smoothed TV."""
    if phi.grid != obj.T.domain_grid:
        raise ValueError("field is not on the operator's domain grid")
    return _objective_arrays(obj, phi.values)


def smoothed_tv_gradient(phi: ScalarField, beta: float) -> ScalarField:
    """Gradient of the smoothed TV: -div(grad phi / sqrt(|grad phi|^2 + beta)).

    beta > 0 keeps the denominator bounded away from zero; the map is
    nonlinear in phi.
    """
    if not (beta > 0.0):
        raise ValueError(f"beta must be > 0, got {beta}")
    return ScalarField(
        phi.grid, _smoothed_tv_grad_arrays(phi.values, phi.grid.spacing, beta)
    )


def objective_gradient(obj: Objective, phi: ScalarField) -> ScalarField:
    """Gradient of F: T*(T phi - f) + alpha * grad of smoothed TV."""
    if phi.grid != obj.T.domain_grid:
        raise ValueError("field is not on the operator's domain grid")
    return ScalarField(obj.T.domain_grid, _objective_grad_arrays(obj, phi.values))


def optimality_residual(obj: Objective, phi: ScalarField) -> float:
    """Norm of the first-order optimality defect T*(f - T phi) - alpha grad J.

    Zero exactly at a stationary point of F (it equals ||grad F|| up to sign).
    """
    if phi.grid != obj.T.domain_grid:
        raise ValueError("field is not on the operator's domain grid")
    return _weighted_norm(_objective_grad_arrays(obj, phi.values), obj.T.domain_grid)


# ---------------------------------------------------------------------------
# solvers


def solve(obj: Objective, opts: SolveOptions = None) -> SolveResult:
    """Dispatch on opts.method."""
    opts = opts if opts is not None else SolveOptions()
    if opts.method == "gradient_descent":
        return solve_gradient_descent(obj, opts)
    return solve_lagged_diffusivity(obj, opts)


def _finish(obj, vals, trace, iters, converged, method, message, settings):
    grid = obj.T.domain_grid
    g = _objective_grad_arrays(obj, vals)
    gn = _weighted_norm(g, grid)
    return SolveResult(
        phi_alpha=ScalarField(grid, vals),
        objective_trace=trace,
        grad_norm=gn,
        discrepancy=_discrepancy(obj, vals),
        optimality_residual=gn,
        outer_iterations=iters,
        converged=converged,
        method=method,
        message=message,
        settings=settings,
    )


def solve_gradient_descent(obj: Objective, opts: SolveOptions = None) -> SolveResult:
    """Armijo-backtracked gradient descent (c1 = 1e-4, step halving).

    The trial step doubles the previously accepted step, so the objective
    trace is strictly nonincreasing.  Terminates when the gradient norm falls
    below grad_tol or after max_outer steps; a collapsed line search (step
    below 1e-16) aborts with converged=False.
    """
    opts = opts if opts is not None else SolveOptions(method="gradient_descent")
    grid = obj.T.domain_grid
    vals = _initial_values(obj, opts)
    settings = {"armijo_c1": ARMIJO_C1, "grad_tol": opts.grad_tol,
                "max_outer": opts.max_outer, "initial": str(type(opts.initial).__name__)
                if isinstance(opts.initial, ScalarField) else opts.initial}
    F = _objective_arrays(obj, vals)
    trace = [F]
    t = 1.0
    converged = False
    message = ""
    iters = 0
    for iters in range(1, opts.max_outer + 1):
        g = _objective_grad_arrays(obj, vals)
        gg = float(np.sum(g * g) * grid.quad_weight)
        gn = math.sqrt(gg)
        if gn <= opts.grad_tol:
            converged = True
            iters -= 1
            break
        t = 2.0 * t
        while True:
            cand = vals - t * g
            Fc = _objective_arrays(obj, cand)
            if Fc <= F - ARMIJO_C1 * t * gg:
                break
            t *= 0.5
            if t < MIN_STEP:
                return _finish(
                    obj, vals, trace, iters, False, "gradient_descent",
                    f"line search collapsed below {MIN_STEP:g} at iteration "
                    f"{iters} (grad norm {gn:.3e})", settings,
                )
        vals = cand
        F = Fc
        trace.append(F)
    else:
        g = _objective_grad_arrays(obj, vals)
        converged = _weighted_norm(g, grid) <= opts.grad_tol
        if not converged:
            message = f"max_outer = {opts.max_outer} reached"
    return _finish(obj, vals, trace, iters, converged, "gradient_descent",
                   message, settings)


class CGInfo(NamedTuple):
    converged: bool
    iterations: int
    relative_residual: float
    breakdown: str


def conjugate_gradient(matvec, b, x0=None, tol=1e-12, max_iter=5000) -> tuple:
    """Plain CG for a symmetric positive (semi-)definite map.

    Stops at relative residual tol; reports breakdown when a search direction
    has non-positive curvature, and stagnation when 100 consecutive steps do
    not reduce the best residual.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - matvec(x)
    p = r.copy()
    rs = float(np.sum(r * r))
    bn = math.sqrt(float(np.sum(b * b)))
    if bn == 0.0:
        bn = 1.0
    best = math.sqrt(rs)
    since_best = 0
    it = 0
    for it in range(1, max_iter + 1):
        if math.sqrt(rs) / bn < tol:
            return x, CGInfo(True, it - 1, math.sqrt(rs) / bn, "")
        Ap = matvec(p)
        pAp = float(np.sum(p * Ap))
        if pAp <= 0.0:
            return x, CGInfo(False, it - 1, math.sqrt(rs) / bn,
                             "non-positive curvature direction")
        a = rs / pAp
        x = x + a * p
        r = r - a * Ap
        rs_new = float(np.sum(r * r))
        rn = math.sqrt(rs_new)
        if rn < best * (1.0 - 1e-12):
            best = rn
            since_best = 0
        else:
            since_best += 1
            if since_best >= 100:
                return x, CGInfo(False, it, rn / bn, "stagnation")
        p = r + (rs_new / rs) * p
        rs = rs_new
    rn = math.sqrt(rs) / bn
    return x, CGInfo(rn < tol, max_iter, rn, "" if rn < tol else "max_iter reached")


def _lagged_system(obj: Objective, D: np.ndarray):
    spacing = obj.T.domain_grid.spacing

    def matvec(x):
        out = obj.T.adjoint_array(obj.T.apply_array(x))
        out -= obj.alpha * div_arrays(D * grad_arrays(x, spacing), spacing)
        return out

    return matvec


def _constants_annihilated(obj: Objective) -> bool:
    ones = np.ones(obj.T.domain_grid.shape)
    t1 = _weighted_norm(obj.T.apply_array(ones), obj.T.range_grid)
    scale = _weighted_norm(ones, obj.T.domain_grid)
    return t1 <= 1e-12 * scale


def solve_lagged_diffusivity(obj: Objective, opts: SolveOptions = None) -> SolveResult:
    """Lagged diffusivity fixed-point iteration.

    Outer step k freezes D_k = 1/sqrt(|grad phi_k|^2 + beta) and solves
    (T*T - alpha div(D_k grad .)) phi = T* f by CG.  Each outer step is a
    majorize-minimize update, so the objective trace is nonincreasing when
    the inner solves are accurate.  Stops when the relative iterate change
    or the optimality residual falls below grad_tol.
    """
    opts = opts if opts is not None else SolveOptions(method="lagged_diffusivity")
    grid = obj.T.domain_grid
    vals = _initial_values(obj, opts)
    b = obj.T.adjoint_array(obj.f_delta.values)
    settings = {"grad_tol": opts.grad_tol, "max_outer": opts.max_outer,
                "cg_tol": opts.cg_tol, "cg_max": opts.cg_max}
    message = ""
    if _constants_annihilated(obj):
        message = ("ill-posed instance: T annihilates constant fields, the "
                   "lagged system is singular on constants")
    trace = [_objective_arrays(obj, vals)]
    converged = False
    iters = 0
    for iters in range(1, opts.max_outer + 1):
        gm = grad_mag_arrays(vals, grid.spacing)
        D = 1.0 / np.sqrt(gm * gm + obj.beta)
        sol, info = conjugate_gradient(
            _lagged_system(obj, D), b, x0=vals, tol=opts.cg_tol,
            max_iter=opts.cg_max,
        )
        if not info.converged:
            message = (message + "; " if message else "") + (
                f"cg failed at outer iteration {iters}: "
                f"{info.breakdown} (relres {info.relative_residual:.3e})"
            )
            vals = sol
            trace.append(_objective_arrays(obj, vals))
            break
        prev_norm = _weighted_norm(vals, grid)
        change = _weighted_norm(sol - vals, grid)
        vals = sol
        trace.append(_objective_arrays(obj, vals))
        g = _objective_grad_arrays(obj, vals)
        res = _weighted_norm(g, grid)
        rel_change = change / prev_norm if prev_norm > 0.0 else change
        if rel_change < opts.grad_tol or res < opts.grad_tol:
            converged = True
            break
    if message and "ill-posed" in message:
        converged = False
    return _finish(obj, vals, trace, iters, converged, "lagged_diffusivity",
                   message, settings)


@dataclass(frozen=True)
class LaggedConditionReport:
    """Numbers behind the convergence condition of the lagged iteration.

    The condition requires the smallest eigenvalue of the linearized
    operator P(phi) = -alpha div(D grad .) + T*T to dominate the largest
    spectral value of T*T, which itself must be at least one.
    """

    lambda_min_estimate: float
    sigma_TstarT: float
    lambda_min_ge_sigma: bool
    sigma_ge_one: bool
    satisfied: bool
    converged: bool
    residual: float


def lagged_condition_check(
    obj: Objective,
    phi: ScalarField,
    tol: float = 1e-8,
    max_iter: int = 300,
    cg_tol: float = 1e-12,
    cg_max: int = 20_000,
) -> LaggedConditionReport:
    """Estimate lambda_min(P(phi)) by inverse power iteration and compare.

    sigma(T*T) is taken from the power-iteration spectral-norm estimate of T.
    """
    if phi.grid != obj.T.domain_grid:
        raise ValueError("field is not on the operator's domain grid")
    grid = obj.T.domain_grid
    gm = grad_mag_arrays(phi.values, grid.spacing)
    D = 1.0 / np.sqrt(gm * gm + obj.beta)
    P = _lagged_system(obj, D)

    state = {"x0": None}

    def inv_matvec(x):
        y, info = conjugate_gradient(P, x, x0=state["x0"], tol=cg_tol,
                                     max_iter=cg_max)
        if not info.converged:
            raise ArithmeticError(
                f"inner cg failed while inverting P: {info.breakdown}"
            )
        state["x0"] = y
        return y

    x0 = SplitMix64(POWER_ITERATION_SEED).normal(grid.npoints).reshape(grid.shape)
    lam_inv, _, _, residual = power_iteration(inv_matvec, x0, tol, max_iter)
    lam_min = 1.0 / lam_inv if lam_inv > 0.0 else math.inf
    sigma = operator_norm(obj.T).value ** 2
    slack = 1e-9 * max(1.0, sigma)
    ge_sigma = lam_min >= sigma - slack
    ge_one = sigma >= 1.0 - 1e-9
    return LaggedConditionReport(
        lambda_min_estimate=lam_min,
        sigma_TstarT=sigma,
        lambda_min_ge_sigma=ge_sigma,
        sigma_ge_one=ge_one,
        satisfied=ge_sigma and ge_one,
        converged=residual < tol,
        residual=residual,
    )
