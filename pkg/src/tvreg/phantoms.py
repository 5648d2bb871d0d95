"""Synthetic ground-truth fields and exact-norm noise injection.

Phantoms are deterministic given their spec (and seed, for the bump
placement), smooth at grid scale, and where possible carry an analytic
Lipschitz-type constant so parameter rules can be fed either the measured or
the analytic coefficient.  Noise is drawn from the documented SplitMix64
stream and rescaled so the perturbation norm equals the requested level
exactly, the hardest case of the noise-ball assumption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import Grid, ScalarField, l2_norm
from .rng import SplitMix64

__all__ = [
    "PhantomSpec",
    "parse_phantom_spec",
    "make_phantom",
    "add_noise",
    "standard_corpus",
]

PHANTOM_KINDS = ("ramp", "gaussian_bumps", "smoothed_step", "product_sine")


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for a synthetic field on a grid.

    kinds and parameters:
      ramp           a
      gaussian_bumps n, width, amplitude
      smoothed_step  width, amplitude
      product_sine   k, amplitude
    """

    kind: str
    grid: Grid
    params: tuple  # sorted (name, value) pairs
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PHANTOM_KINDS:
            raise ValueError(
                f"unknown phantom kind {self.kind!r}; expected one of {PHANTOM_KINDS}"
            )
        object.__setattr__(self, "params", tuple(sorted(self.params)))

    def param(self, name, default=None):
        table = dict(self.params)
        if name in table:
            return table[name]
        if default is None:
            raise ValueError(f"phantom {self.kind!r} needs parameter {name!r}")
        return default

    @property
    def analytic_kappa(self):
        """Analytic bound on the Lipschitz constant, when available."""
        if self.kind == "ramp":
            return abs(self.param("a"))
        if self.kind == "smoothed_step":
            # slope of A/2 * (1 + tanh(x/w)) peaks at A/(2w)
            return abs(self.param("amplitude", 1.0)) / (2.0 * self.param("width"))
        if self.kind == "product_sine":
            amp = abs(self.param("amplitude", 1.0))
            k = self.param("k")
            return (
                amp * math.pi * k
                * math.sqrt(sum(1.0 / e**2 for e in self.grid.extents))
            )
        if self.kind == "gaussian_bumps":
            n = int(self.param("n"))
            width = self.param("width")
            amp = abs(self.param("amplitude", 1.0))
            # each bump's gradient peaks at amp / (width * sqrt(e))
            return n * amp / (width * math.sqrt(math.e))
        return None


def parse_phantom_spec(text: str, grid: Grid, seed: int = 0) -> PhantomSpec:
    """Parse ``kind:key=value,...`` into a PhantomSpec."""
    head, _, rest = text.partition(":")
    params = []
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ValueError(f"malformed phantom parameter {item!r} in {text!r}")
            params.append((key.strip(), float(value)))
    return PhantomSpec(kind=head.strip(), grid=grid, params=tuple(params), seed=seed)


def _unit_coords(grid: Grid):
    """Coordinates rescaled to [0, 1] per axis."""
    meshes = grid.meshes()
    return [
        (m - o) / e for m, o, e in zip(meshes, grid.origin, grid.extents)
    ]


def make_phantom(spec: PhantomSpec) -> ScalarField:
    """Deterministic synthetic field for the given spec."""
    grid = spec.grid
    if spec.kind == "ramp":
        a = spec.param("a")
        x0 = grid.meshes()[0]
        return ScalarField(grid, a * (x0 - grid.origin[0]))

    if spec.kind == "product_sine":
        k = spec.param("k")
        amp = spec.param("amplitude", 1.0)
        vals = np.full(grid.shape, amp)
        for xi in _unit_coords(grid):
            vals = vals * np.sin(math.pi * k * xi)
        return ScalarField(grid, vals)

    if spec.kind == "smoothed_step":
        width = spec.param("width")
        amp = spec.param("amplitude", 1.0)
        x0 = grid.meshes()[0]
        mid = grid.origin[0] + 0.5 * grid.extents[0]
        vals = amp * 0.5 * (1.0 + np.tanh((x0 - mid) / width))
        return ScalarField(grid, vals)

    # gaussian_bumps: centers drawn from the seeded stream, kept away from
    # the boundary so the bumps stay smooth at grid scale
    n = int(spec.param("n"))
    width = spec.param("width")
    amp = spec.param("amplitude", 1.0)
    rng = SplitMix64(spec.seed)
    vals = np.zeros(grid.shape)
    coords = _unit_coords(grid)
    for _ in range(n):
        center = 0.2 + 0.6 * rng.uniform(grid.dim)
        d2 = np.zeros(grid.shape)
        for xi, c, e in zip(coords, center, grid.extents):
            d2 = d2 + ((xi - c) * e) ** 2
        vals += amp * np.exp(-0.5 * d2 / width**2)
    return ScalarField(grid, vals)


def add_noise(f: ScalarField, delta: float, seed: int) -> ScalarField:
    """Perturb f by a Gaussian field rescaled so the L2 perturbation is delta.

    The equality ||noisy - f|| = delta is exact up to roundoff.  delta = 0
    returns f unchanged.
    """
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if delta == 0.0:
        return ScalarField(f.grid, f.values.copy())
    noise = noise_direction(f.grid, seed)
    return ScalarField(f.grid, f.values + delta * noise.values)


def noise_direction(grid: Grid, seed: int) -> ScalarField:
    """Unit-norm Gaussian field from the seeded stream.

    A zero draw (probability ~ 0) is reseeded once, then rejected.
    """
    for attempt_seed in (seed, seed + 1):
        g = SplitMix64(attempt_seed).normal(grid.npoints).reshape(grid.shape)
        norm = math.sqrt(float(np.sum(g * g)) * grid.quad_weight)
        if norm > 0.0:
            return ScalarField(grid, g / norm)
    raise ArithmeticError("noise draw has zero norm even after reseeding")


def standard_corpus() -> list:
    """The shipped 12-phantom corpus: six 2D and six 3D smooth instances.

    Amplitudes are chosen so every instance has a Lipschitz coefficient of a
    few units on its unit domain; the successive-TV bound is vacuous or false
    for nearly flat fields, so desk-scale verification needs this regime.
    Returns (name, ScalarField) pairs; grids are shared within each
    dimension so instances can be paired for two-field checks.
    """
    g2 = Grid.regular((16, 16), (1.0, 1.0))
    g3 = Grid.regular((12, 12, 12), (1.0, 1.0, 1.0))
    specs = [
        ("2d_ramp_a2", PhantomSpec("ramp", g2, (("a", 2.0),))),
        ("2d_ramp_a3p5", PhantomSpec("ramp", g2, (("a", 3.5),))),
        ("2d_sine_k1", PhantomSpec("product_sine", g2, (("k", 1.0), ("amplitude", 0.7)))),
        ("2d_sine_k2", PhantomSpec("product_sine", g2, (("k", 2.0), ("amplitude", 0.45)))),
        ("2d_bumps", PhantomSpec("gaussian_bumps", g2,
                                 (("n", 2.0), ("width", 0.22), ("amplitude", 1.1)),
                                 seed=11)),
        ("2d_step", PhantomSpec("smoothed_step", g2,
                                (("width", 0.3), ("amplitude", 0.7)))),
        ("3d_ramp_a2", PhantomSpec("ramp", g3, (("a", 2.0),))),
        ("3d_ramp_a3", PhantomSpec("ramp", g3, (("a", 3.0),))),
        ("3d_sine_k1", PhantomSpec("product_sine", g3, (("k", 1.0), ("amplitude", 0.55)))),
        ("3d_sine_k2", PhantomSpec("product_sine", g3, (("k", 2.0), ("amplitude", 0.3)))),
        ("3d_bumps", PhantomSpec("gaussian_bumps", g3,
                                 (("n", 2.0), ("width", 0.28), ("amplitude", 1.3)),
                                 seed=23)),
        ("3d_step", PhantomSpec("smoothed_step", g3,
                                (("width", 0.15), ("amplitude", 0.9)))),
    ]
    return [(name, make_phantom(spec)) for name, spec in specs]
