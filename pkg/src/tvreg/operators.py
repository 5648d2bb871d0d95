"""Linear forward operators with adjoints and spectral-norm estimation.

Three operator kinds are provided: the identity, a normalized Gaussian blur
(periodic or zero-padded), and a dense matrix acting on flattened fields.
Adjoints are taken with respect to the quadrature inner product of
:mod:`tvreg.fields`; :func:`adjoint_test` measures the worst relative defect
over random trial pairs, and :func:`operator_norm` estimates the spectral
norm by power iteration on ``T* T`` from a fixed-seed start vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .fields import Grid, ScalarField
from .rng import POWER_ITERATION_SEED, SplitMix64

__all__ = [
    "LinearOperator",
    "Identity",
    "GaussianBlur",
    "DenseMatrix",
    "OperatorNormEstimate",
    "apply",
    "adjoint_apply",
    "operator_norm",
    "adjoint_test",
    "parse_operator",
]


class LinearOperator:
    """Base class: apply/adjoint on fields plus raw-array hooks for solvers."""

    kind: str
    domain_grid: Grid
    range_grid: Grid

    def apply_array(self, vals: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint_array(self, vals: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, u: ScalarField) -> ScalarField:
        if u.grid != self.domain_grid:
            raise ValueError("input field is not on the operator's domain grid")
        return ScalarField(self.range_grid, self.apply_array(u.values))

    def adjoint_apply(self, v: ScalarField) -> ScalarField:
        if v.grid != self.range_grid:
            raise ValueError("input field is not on the operator's range grid")
        return ScalarField(self.domain_grid, self.adjoint_array(v.values))


class Identity(LinearOperator):
    kind = "identity"

    def __init__(self, grid: Grid):
        self.domain_grid = grid
        self.range_grid = grid

    def apply_array(self, vals):
        return vals.copy()

    adjoint_array = apply_array


class GaussianBlur(LinearOperator):
    """Separable Gaussian blur, kernel truncated at +-4 sigma and renormalized.

    The unit-sum kernel preserves constants under periodic boundaries.  The
    kernel is symmetric, so the operator is self-adjoint for both boundary
    rules.  ``sigma`` is in physical length units.
    """

    kind = "gaussian_blur"

    def __init__(self, grid: Grid, sigma: float, boundary: str = "periodic"):
        if not (sigma > 0.0):
            raise ValueError(f"sigma must be positive, got {sigma}")
        if boundary not in ("periodic", "zero"):
            raise ValueError(f"boundary must be 'periodic' or 'zero', got {boundary!r}")
        self.domain_grid = grid
        self.range_grid = grid
        self.sigma = float(sigma)
        self.boundary = boundary
        self._kernels = []
        for h in grid.spacing:
            radius = max(1, int(math.ceil(4.0 * sigma / h)))
            x = np.arange(-radius, radius + 1) * h
            k = np.exp(-0.5 * (x / sigma) ** 2)
            self._kernels.append(k / np.sum(k))
        self._mode = "wrap" if boundary == "periodic" else "constant"

    def apply_array(self, vals):
        out = vals
        for a, k in enumerate(self._kernels):
            out = convolve1d(out, k, axis=a, mode=self._mode, cval=0.0)
        return out

    # symmetric kernel: self-adjoint under both boundary rules
    adjoint_array = apply_array


class DenseMatrix(LinearOperator):
    """Dense matrix on flattened fields; rows x cols must match the grids.

    Injectivity is assumed by the surrounding theory but not policed here;
    callers may supply non-injective matrices.
    """

    kind = "dense_matrix"

    def __init__(self, matrix: np.ndarray, domain_grid: Grid, range_grid: Grid = None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        if range_grid is None:
            range_grid = domain_grid
        rows, cols = matrix.shape
        if cols != domain_grid.npoints:
            raise ValueError(
                f"matrix has {cols} columns but the domain grid has "
                f"{domain_grid.npoints} points"
            )
        if rows != range_grid.npoints:
            raise ValueError(
                f"matrix has {rows} rows but the range grid has "
                f"{range_grid.npoints} points"
            )
        self.matrix = matrix
        self.domain_grid = domain_grid
        self.range_grid = range_grid
        # adjoint under the weighted inner products: (w_range / w_domain) M^T
        self._adjoint_factor = range_grid.quad_weight / domain_grid.quad_weight

    def apply_array(self, vals):
        out = self.matrix @ vals.ravel()
        return out.reshape(self.range_grid.shape)

    def adjoint_array(self, vals):
        out = self._adjoint_factor * (self.matrix.T @ vals.ravel())
        return out.reshape(self.domain_grid.shape)


def apply(T: LinearOperator, u: ScalarField) -> ScalarField:
    return T.apply(u)


def adjoint_apply(T: LinearOperator, v: ScalarField) -> ScalarField:
    return T.adjoint_apply(v)


@dataclass(frozen=True)
class OperatorNormEstimate:
    """Spectral-norm estimate with its power-iteration diagnostics."""

    value: float
    iterations: int
    residual: float
    converged: bool


def power_iteration(matvec, x0: np.ndarray, tol: float, max_iter: int):
    """Largest eigenvalue of a symmetric PSD map given by ``matvec``.

    Returns (eigenvalue, eigenvector, iterations, relative residual).
    """
    x = x0 / np.sqrt(np.sum(x0 * x0))
    lam = 0.0
    residual = np.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        y = matvec(x)
        lam = float(np.sum(x * y))
        residual = float(np.sqrt(np.sum((y - lam * x) ** 2)))
        residual /= abs(lam) if lam != 0.0 else 1.0
        ny = np.sqrt(np.sum(y * y))
        if ny == 0.0:  # x in the kernel: eigenvalue 0 found exactly
            return 0.0, x, iters, 0.0
        x = y / ny
        if residual < tol:
            break
    return lam, x, iters, residual


def operator_norm(
    T: LinearOperator, tol: float = 1e-10, max_iter: int = 10_000
) -> OperatorNormEstimate:
    """Spectral norm ||T|| = ||T*|| by power iteration on T*T.

    The start vector is drawn from a fixed-seed stream so the estimate is
    reproducible.  On non-convergence the last iterate is returned with its
    residual, flagged unconverged.
    """
    if not (tol > 0.0):
        raise ValueError(f"tol must be positive, got {tol}")
    grid = T.domain_grid
    x0 = SplitMix64(POWER_ITERATION_SEED).normal(grid.npoints).reshape(grid.shape)

    def matvec(x):
        return T.adjoint_array(T.apply_array(x))

    lam, _, iters, residual = power_iteration(matvec, x0, tol, max_iter)
    value = math.sqrt(max(lam, 0.0))
    return OperatorNormEstimate(
        value=value, iterations=iters, residual=residual, converged=residual < tol
    )


def adjoint_test(T: LinearOperator, trials: int = 20, seed: int = 7) -> float:
    """Worst relative adjoint defect |<Tu,v> - <u,T*v>| over random pairs."""
    rng = SplitMix64(seed)
    dom, ran = T.domain_grid, T.range_grid
    w_dom, w_ran = dom.quad_weight, ran.quad_weight
    worst = 0.0
    for _ in range(trials):
        u = rng.normal(dom.npoints).reshape(dom.shape)
        v = rng.normal(ran.npoints).reshape(ran.shape)
        Tu = T.apply_array(u)
        Tsv = T.adjoint_array(v)
        lhs = float(np.sum(Tu * v) * w_ran)
        rhs = float(np.sum(u * Tsv) * w_dom)
        scale = float(
            np.sqrt(np.sum(Tu * Tu) * w_ran) * np.sqrt(np.sum(v * v) * w_ran)
        )
        worst = max(worst, abs(lhs - rhs) / (scale + 1e-300))
    return worst


def parse_operator(spec: str, grid: Grid) -> LinearOperator:
    """Build an operator from a CLI spec string.

    Accepted forms: ``identity``, ``blur:sigma=<f>,boundary=periodic|zero``
    and ``matrix:path=<file>`` (square TVM1 matrix applied on ``grid``).
    """
    head, _, rest = spec.partition(":")
    head = head.strip()
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ValueError(f"malformed operator parameter {item!r} in {spec!r}")
            params[key.strip()] = value.strip()
    if head == "identity":
        return Identity(grid)
    if head == "blur":
        sigma = float(params.pop("sigma"))
        boundary = params.pop("boundary", "periodic")
        if params:
            raise ValueError(f"unknown blur parameters {sorted(params)}")
        return GaussianBlur(grid, sigma, boundary=boundary)
    if head == "matrix":
        from .io import read_matrix_tvm

        path = params.pop("path")
        if params:
            raise ValueError(f"unknown matrix parameters {sorted(params)}")
        return DenseMatrix(read_matrix_tvm(path), grid)
    raise ValueError(f"unknown operator kind {head!r} in {spec!r}")
