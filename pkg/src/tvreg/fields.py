"""Discrete calculus on regular grid domains.

Grids are vertex-centered: point ``i`` along axis ``a`` sits at
``origin[a] + i * spacing[a]``, so the physical extent of an axis is
``(shape[a] - 1) * spacing[a]`` and the corners of the box belong to the
grid.  Integrals use a single uniform quadrature weight ``volume / npoints``;
constants therefore integrate to exactly the domain volume, and the same
weight defines the inner products under which the discrete divergence is the
exact negative adjoint of the discrete gradient.

Gradients are one-sided forward differences with a replicated last slice
(the component vanishes there), which keeps the operator linear with an
explicit adjoint.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rng import HOLDER_SAMPLING_SEED, SplitMix64

__all__ = [
    "Grid",
    "DomainGeometry",
    "ScalarField",
    "VectorField",
    "HolderParams",
    "HolderCoefficient",
    "geometry",
    "gradient",
    "divergence",
    "grad_magnitude",
    "tv",
    "smoothed_tv",
    "lp_norm",
    "bv_norm",
    "holder_coefficient",
    "holder_norm",
    "inner",
    "l2_norm",
]

# Largest point count for which the Hoelder supremum is taken over every
# point pair; beyond it only a sampled lower bound is reported.
EXHAUSTIVE_PAIR_THRESHOLD = 4096


@dataclass(frozen=True)
class Grid:
    """Regular grid over a box domain in 2 or 3 dimensions."""

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...] = None  # defaults to zeros

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        spacing = tuple(float(h) for h in self.spacing)
        origin = self.origin
        if origin is None:
            origin = (0.0,) * len(shape)
        origin = tuple(float(o) for o in origin)
        if len(shape) not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {len(shape)}")
        if len(spacing) != len(shape) or len(origin) != len(shape):
            raise ValueError("shape, spacing and origin must have equal length")
        if any(n < 2 for n in shape):
            raise ValueError(f"each axis needs at least 2 points, got {shape}")
        if any(not (h > 0.0) or not math.isfinite(h) for h in spacing):
            raise ValueError(f"spacings must be positive, got {spacing}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def regular(cls, shape, extents, origin=None) -> "Grid":
        """Grid with the given point counts spanning the given extents."""
        spacing = tuple(float(e) / (int(n) - 1) for n, e in zip(shape, extents))
        return cls(tuple(shape), spacing, origin)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    @property
    def extents(self) -> tuple[float, ...]:
        return tuple((n - 1) * h for n, h in zip(self.shape, self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def diameter(self) -> float:
        return float(math.sqrt(sum(e * e for e in self.extents)))

    @property
    def quad_weight(self) -> float:
        """Uniform quadrature weight; N of these tile the domain volume."""
        return self.volume / self.npoints

    def axes(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays."""
        return tuple(
            o + h * np.arange(n)
            for n, h, o in zip(self.shape, self.spacing, self.origin)
        )

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of full grid shape, one per axis."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All grid point coordinates as an (npoints, dim) array."""
        return np.stack([m.ravel() for m in self.meshes()], axis=1)


@dataclass(frozen=True)
class DomainGeometry:
    """Volume and diameter of the box domain carried by a grid."""

    volume: float
    diameter: float


def geometry(grid: Grid) -> DomainGeometry:
    return DomainGeometry(volume=grid.volume, diameter=grid.diameter)


def _first_nonfinite(values: np.ndarray):
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad)), values.shape)
        return tuple(int(i) for i in idx)
    return None


@dataclass
class ScalarField:
    """Scalar samples, one per grid point."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise ValueError(
                f"values shape {vals.shape} does not match grid {self.grid.shape}"
            )
        idx = _first_nonfinite(vals)
        if idx is not None:
            raise ValueError(f"non-finite field value at index {idx}")
        self.values = vals


@dataclass
class VectorField:
    """Per-axis component samples, stacked as components[axis, point...]."""

    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=np.float64)
        if comps.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError(
                f"components shape {comps.shape} does not match "
                f"({self.grid.dim},) + {self.grid.shape}"
            )
        idx = _first_nonfinite(comps)
        if idx is not None:
            raise ValueError(f"non-finite component value at index {idx}")
        self.components = comps


@dataclass(frozen=True)
class HolderParams:
    """Exponent and coefficient of a Hoelder-continuity bound."""

    gamma: float
    kappa: float

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not math.isfinite(self.kappa) or self.kappa < 0.0:
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa}")


# ---------------------------------------------------------------------------
# array-level kernels (shared with the solvers, which work on raw arrays)


def grad_arrays(vals: np.ndarray, spacing) -> np.ndarray:
    """Forward differences per axis; zero on the last slice of each axis."""
    dim = vals.ndim
    out = np.zeros((dim,) + vals.shape)
    for a in range(dim):
        sl = [slice(None)] * dim
        sl[a] = slice(0, vals.shape[a] - 1)
        out[a][tuple(sl)] = np.diff(vals, axis=a) / spacing[a]
    return out


def div_arrays(comps: np.ndarray, spacing) -> np.ndarray:
    """Exact negative adjoint of :func:`grad_arrays` under the plain sum."""
    dim = comps.shape[0]
    out = np.zeros(comps.shape[1:])
    for a in range(dim):
        q = comps[a]
        n = q.shape[a]
        head = [slice(None)] * dim
        head[a] = slice(0, n - 1)
        tail = [slice(None)] * dim
        tail[a] = slice(1, n)
        contrib = np.zeros_like(q)
        contrib[tuple(head)] = q[tuple(head)]
        contrib[tuple(tail)] -= q[tuple(head)]
        out += contrib / spacing[a]
    return out


def grad_mag_arrays(vals: np.ndarray, spacing) -> np.ndarray:
    g = grad_arrays(vals, spacing)
    return np.sqrt(np.sum(g * g, axis=0))


# ---------------------------------------------------------------------------
# public operations on fields


def gradient(phi: ScalarField) -> VectorField:
    """Discrete gradient of a scalar field."""
    idx = _first_nonfinite(phi.values)
    if idx is not None:
        raise ValueError(f"non-finite field value at index {idx}")
    return VectorField(phi.grid, grad_arrays(phi.values, phi.grid.spacing))


def divergence(p: VectorField) -> ScalarField:
    """Discrete divergence, the exact negative adjoint of :func:`gradient`."""
    idx = _first_nonfinite(p.components)
    if idx is not None:
        raise ValueError(f"non-finite component value at index {idx}")
    return ScalarField(p.grid, div_arrays(p.components, p.grid.spacing))


def grad_magnitude(phi: ScalarField) -> ScalarField:
    """Pointwise Euclidean norm of the gradient."""
    return ScalarField(phi.grid, grad_mag_arrays(phi.values, phi.grid.spacing))


def inner(a, b) -> float:
    """Quadrature inner product of two fields on the same grid.

    Reductions use numpy's fixed pairwise summation order, so the result is
    reproducible regardless of caller parallelism.
    """
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if isinstance(a, VectorField) != isinstance(b, VectorField):
        raise ValueError("cannot pair a scalar field with a vector field")
    x = a.components if isinstance(a, VectorField) else a.values
    y = b.components if isinstance(b, VectorField) else b.values
    return float(np.sum(x * y) * a.grid.quad_weight)


def l2_norm(a) -> float:
    """Quadrature L2 norm of a scalar or vector field."""
    x = a.components if isinstance(a, VectorField) else a.values
    return float(np.sqrt(np.sum(x * x) * a.grid.quad_weight))


def tv(phi: ScalarField) -> float:
    """Total variation: quadrature sum of the gradient magnitude."""
    gm = grad_mag_arrays(phi.values, phi.grid.spacing)
    return float(np.sum(gm) * phi.grid.quad_weight)


def smoothed_tv(phi: ScalarField, beta: float) -> float:
    """Smoothed total variation, integrating sqrt(|grad|^2 + beta)."""
    if not (beta > 0.0):
        raise ValueError(f"beta must be positive, got {beta}")
    if beta >= 1.0:
        warnings.warn(
            f"beta = {beta} >= 1 is outside the intended range (0, 1)",
            stacklevel=2,
        )
    gm = grad_mag_arrays(phi.values, phi.grid.spacing)
    return float(np.sum(np.sqrt(gm * gm + beta)) * phi.grid.quad_weight)


def lp_norm(phi: ScalarField, p) -> float:
    """Quadrature-weighted p-norm for p in {1, 2, 4}, or the max norm."""
    v = phi.values
    w = phi.grid.quad_weight
    if p == math.inf:
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p == 1:
        return float(np.sum(np.abs(v)) * w)
    if p == 2:
        return float(np.sqrt(np.sum(v * v) * w))
    if p == 4:
        v2 = v * v
        return float((np.sum(v2 * v2) * w) ** 0.25)
    raise ValueError(f"unsupported norm order {p}; use 1, 2, 4 or inf")


def bv_norm(phi: ScalarField) -> float:
    """L1 norm plus total variation."""
    return lp_norm(phi, 1) + tv(phi)


class HolderCoefficient(float):
    """A float carrying whether it is exact or only a sampled lower bound."""

    lower_bound: bool

    def __new__(cls, value: float, lower_bound: bool):
        obj = super().__new__(cls, value)
        obj.lower_bound = bool(lower_bound)
        return obj


def _pair_ratio_max(vals, coords, rows, gamma) -> float:
    """Max of |v_i - v_j| / d_ij^gamma over pairs (i in rows, j in all)."""
    d2 = np.sum((coords[rows, None, :] - coords[None, :, :]) ** 2, axis=-1)
    dist = np.sqrt(d2)
    num = np.abs(vals[rows, None] - vals[None, :])
    dist[dist == 0.0] = np.inf
    denom = dist if gamma == 1.0 else dist**gamma
    return float(np.max(num / denom))


def holder_coefficient(
    phi: ScalarField,
    gamma: float,
    exhaustive_threshold: int = EXHAUSTIVE_PAIR_THRESHOLD,
    sample_pairs: int = 200_000,
) -> HolderCoefficient:
    """Hoelder coefficient sup |phi(x) - phi(y)| / |x - y|^gamma.

    Exact (all point pairs) while the grid has at most ``exhaustive_threshold``
    points.  Larger grids get a lower bound from every axis-neighbor pair plus
    ``sample_pairs`` stratified random pairs, flagged via ``lower_bound``.
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    grid = phi.grid
    vals = phi.values.ravel()
    n = grid.npoints

    if n <= exhaustive_threshold:
        coords = grid.points()
        block = max(1, int(2**22 / max(n, 1)))
        best = 0.0
        for lo in range(0, n, block):
            rows = np.arange(lo, min(lo + block, n))
            best = max(best, _pair_ratio_max(vals, coords, rows, gamma))
        return HolderCoefficient(best, lower_bound=False)

    # sampled lower bound: axis neighbors first
    best = 0.0
    for a in range(grid.dim):
        jumps = np.abs(np.diff(phi.values, axis=a))
        if jumps.size:
            best = max(best, float(np.max(jumps)) / grid.spacing[a] ** gamma)
    # then stratified random pairs: first index from each stratum in turn
    coords = grid.points()
    rng = SplitMix64(HOLDER_SAMPLING_SEED)
    strata = 64
    per = max(1, sample_pairs // strata)
    bounds = np.linspace(0, n, strata + 1).astype(int)
    for s in range(strata):
        lo, hi = bounds[s], bounds[s + 1]
        if hi <= lo:
            continue
        i = lo + rng.integers(per, hi - lo)
        j = rng.integers(per, n)
        keep = i != j
        i, j = i[keep], j[keep]
        dist = np.sqrt(np.sum((coords[i] - coords[j]) ** 2, axis=-1))
        denom = dist if gamma == 1.0 else dist**gamma
        ratios = np.abs(vals[i] - vals[j]) / denom
        if ratios.size:
            best = max(best, float(np.max(ratios)))
    return HolderCoefficient(best, lower_bound=True)


def holder_norm(phi: ScalarField, gamma: float) -> float:
    """Sup norm plus the Hoelder coefficient."""
    return float(lp_norm(phi, math.inf) + holder_coefficient(phi, gamma))
