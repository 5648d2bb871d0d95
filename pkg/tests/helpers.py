"""Shared test utilities: field generators and independent mini-oracles."""

import numpy as np

from tvreg import Grid, ScalarField


def random_field(grid: Grid, seed: int, scale: float = 1.0) -> ScalarField:
    rng = np.random.default_rng(seed)
    return ScalarField(grid, scale * rng.normal(size=grid.shape))


def smooth_field(grid: Grid, seed: int, amplitude: float = 1.0,
                 modes: int = 3) -> ScalarField:
    """Random low-frequency field: a few sine/cosine products, C-infinity."""
    rng = np.random.default_rng(seed)
    coords = [
        (m - o) / e
        for m, o, e in zip(grid.meshes(), grid.origin, grid.extents)
    ]
    vals = np.zeros(grid.shape)
    for _ in range(modes):
        coeff = rng.normal()
        ks = rng.integers(1, 3, size=grid.dim)
        phases = rng.uniform(0, 2 * np.pi, size=grid.dim)
        term = np.full(grid.shape, coeff)
        for xi, k, ph in zip(coords, ks, phases):
            term = term * np.sin(np.pi * k * xi + ph)
        vals += term
    scale = np.max(np.abs(vals))
    if scale > 0:
        vals *= amplitude / scale
    return ScalarField(grid, vals)


def ramp_field(grid: Grid, a: float) -> ScalarField:
    x0 = grid.meshes()[0]
    return ScalarField(grid, a * (x0 - grid.origin[0]))


def pair_oracle_holder(phi: ScalarField, gamma: float) -> float:
    """Brute-force O(n^2) Hoelder coefficient over all point pairs."""
    coords = phi.grid.points()
    vals = phi.values.ravel()
    best = 0.0
    n = len(vals)
    for i in range(n):
        d = np.sqrt(np.sum((coords[i + 1:] - coords[i]) ** 2, axis=1))
        ratios = np.abs(vals[i + 1:] - vals[i]) / d**gamma
        if ratios.size:
            best = max(best, float(np.max(ratios)))
    return best


def jacobi_eigenvalues(A: np.ndarray, sweeps: int = 50) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by classical Jacobi rotation sweeps."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(A[p, q]))
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = 0.5 * np.arctan2(2.0 * A[p, q], A[q, q] - A[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
        if off < 1e-14:
            break
    return np.sort(np.diag(A))
