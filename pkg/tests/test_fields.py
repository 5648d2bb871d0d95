import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvreg import (
    Grid,
    ScalarField,
    VectorField,
    bv_norm,
    divergence,
    geometry,
    grad_magnitude,
    gradient,
    holder_coefficient,
    holder_norm,
    inner,
    lp_norm,
    smoothed_tv,
    tv,
)
from helpers import pair_oracle_holder, ramp_field, random_field


@pytest.fixture
def cube8():
    return Grid.regular((8, 8, 8), (1.0, 1.0, 1.0))


@pytest.fixture
def square16():
    return Grid.regular((16, 16), (1.0, 1.0))


class TestGrid:
    def test_unit_cube_geometry(self, cube8):
        geo = geometry(cube8)
        assert geo.volume == pytest.approx(1.0, rel=1e-14)
        assert geo.diameter == pytest.approx(math.sqrt(3.0), rel=1e-14)

    def test_box_geometry(self):
        geo = geometry(Grid.regular((9, 5, 5), (2.0, 1.0, 1.0)))
        assert geo.volume == pytest.approx(2.0, rel=1e-14)
        assert geo.diameter == pytest.approx(math.sqrt(6.0), rel=1e-14)

    def test_unit_square_geometry(self, square16):
        geo = geometry(square16)
        assert geo.volume == pytest.approx(1.0, rel=1e-14)
        assert geo.diameter == pytest.approx(math.sqrt(2.0), rel=1e-14)

    def test_extent_is_gaps_times_spacing(self):
        g = Grid((4, 6), (0.5, 0.25))
        assert g.extents == (1.5, 1.25)
        assert g.npoints == 24

    def test_quad_weights_tile_volume(self, cube8):
        assert cube8.quad_weight * cube8.npoints == pytest.approx(cube8.volume)

    @pytest.mark.parametrize("shape,spacing", [
        ((8,), (0.1,)),              # 1D unsupported
        ((8, 8, 8, 8), (1, 1, 1, 1)),
        ((1, 8), (0.1, 0.1)),        # axis with a single point
        ((8, 8), (0.1, -0.1)),
        ((8, 8), (0.1, 0.0)),
    ])
    def test_invalid_grids_rejected(self, shape, spacing):
        with pytest.raises(ValueError):
            Grid(shape, spacing)


class TestFieldValidation:
    def test_nonfinite_rejected_with_index(self, square16):
        vals = np.zeros(square16.shape)
        vals[3, 7] = np.nan
        with pytest.raises(ValueError, match=r"\(3, 7\)"):
            ScalarField(square16, vals)

    def test_shape_mismatch_rejected(self, square16):
        with pytest.raises(ValueError, match="does not match"):
            ScalarField(square16, np.zeros((4, 4)))

    def test_vector_component_count(self, square16):
        with pytest.raises(ValueError):
            VectorField(square16, np.zeros((3,) + square16.shape))


class TestGradient:
    def test_constant_has_zero_gradient(self, cube8):
        g = gradient(ScalarField(cube8, np.full(cube8.shape, 4.2)))
        assert np.all(g.components == 0.0)

    def test_linear_ramp(self, cube8):
        g = gradient(ramp_field(cube8, 2.0))
        interior = g.components[0][:-1, :, :]
        assert np.allclose(interior, 2.0, atol=1e-12)
        assert np.all(g.components[0][-1, :, :] == 0.0)
        assert np.allclose(g.components[1], 0.0)
        assert np.allclose(g.components[2], 0.0)

    def test_matches_index_oracle(self, cube8):
        phi = random_field(cube8, seed=5)
        g = gradient(phi).components
        v = phi.values
        h = cube8.spacing
        # independent index-by-index forward-difference oracle
        for a in range(3):
            for idx in np.ndindex(*cube8.shape):
                nxt = list(idx)
                nxt[a] += 1
                if nxt[a] >= cube8.shape[a]:
                    expect = 0.0
                else:
                    expect = (v[tuple(nxt)] - v[idx]) / h[a]
                got = g[a][idx]
                assert got == pytest.approx(expect, rel=1e-15, abs=1e-15)


class TestDivergence:
    def test_adjoint_identity_direct_summation(self, cube8):
        u = random_field(cube8, seed=1)
        p = VectorField(cube8, np.random.default_rng(2).normal(
            size=(3,) + cube8.shape))
        w = cube8.quad_weight
        lhs = float(np.sum(gradient(u).components * p.components) * w)
        rhs = -float(np.sum(u.values * divergence(p).values) * w)
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)

    def test_zero_field_maps_to_zero(self, cube8):
        p = VectorField(cube8, np.zeros((3,) + cube8.shape))
        assert np.all(divergence(p).values == 0.0)

    def test_constant_components_vanish_in_interior(self, square16):
        p = VectorField(square16, np.ones((2,) + square16.shape))
        d = divergence(p).values
        assert np.allclose(d[1:-1, 1:-1], 0.0, atol=1e-13)
        # boundary rows carry the adjoint correction
        assert abs(d[0, 1]) > 0.0 and abs(d[-1, 1]) > 0.0


class TestGradMagnitude:
    def test_constant(self, cube8):
        gm = grad_magnitude(ScalarField(cube8, np.full(cube8.shape, 3.0)))
        assert np.all(gm.values == 0.0)

    def test_ramp(self, cube8):
        gm = grad_magnitude(ramp_field(cube8, 2.0))
        assert np.allclose(gm.values[:-1, :, :], 2.0, atol=1e-12)

    def test_diagonal_ramp_2d(self, square16):
        X, Y = square16.meshes()
        gm = grad_magnitude(ScalarField(square16, X + Y))
        assert np.allclose(gm.values[:-1, :-1], math.sqrt(2.0), atol=1e-12)


class TestTv:
    def test_constant_is_zero(self, cube8):
        assert tv(ScalarField(cube8, np.full(cube8.shape, 7.0))) == 0.0

    def test_ramp_boundary_deficit(self):
        # one slice of zeroed forward differences: 3 * (n-1)/n at n^3 points
        g = Grid.regular((32, 32, 32), (1.0, 1.0, 1.0))
        val = tv(ramp_field(g, 3.0))
        assert val == pytest.approx(3.0 * 31.0 / 32.0, rel=1e-12)
        assert abs(val - 3.0) / 3.0 <= 2.0 / 31.0

    def test_matches_summation_oracle(self, cube8):
        phi = random_field(cube8, seed=9)
        v = phi.values
        h = cube8.spacing
        total = 0.0
        for idx in np.ndindex(*cube8.shape):
            s = 0.0
            for a in range(3):
                nxt = list(idx)
                nxt[a] += 1
                if nxt[a] < cube8.shape[a]:
                    s += ((v[tuple(nxt)] - v[idx]) / h[a]) ** 2
            total += math.sqrt(s)
        expect = total * cube8.quad_weight
        assert tv(phi) == pytest.approx(expect, rel=1e-14)


class TestSmoothedTv:
    def test_constant_unit_volume(self, cube8):
        phi = ScalarField(cube8, np.full(cube8.shape, 2.0))
        assert smoothed_tv(phi, 0.01) == pytest.approx(0.1, rel=1e-13)

    def test_constant_volume_two(self):
        g = Grid.regular((9, 5, 5), (2.0, 1.0, 1.0))
        phi = ScalarField(g, np.zeros(g.shape))
        assert smoothed_tv(phi, 0.04) == pytest.approx(0.4, rel=1e-13)

    def test_monotone_in_beta_and_limits_to_tv(self, cube8):
        phi = random_field(cube8, seed=3)
        base = tv(phi)
        values = [smoothed_tv(phi, b) for b in (1e-2, 1e-4, 1e-6)]
        assert values[0] > values[1] > values[2] >= base
        assert values[2] == pytest.approx(base, rel=1e-3)

    def test_beta_nonpositive_rejected(self, cube8):
        phi = random_field(cube8, seed=3)
        with pytest.raises(ValueError):
            smoothed_tv(phi, 0.0)
        with pytest.raises(ValueError):
            smoothed_tv(phi, -0.1)

    def test_beta_at_least_one_warns(self, cube8):
        phi = random_field(cube8, seed=3)
        with pytest.warns(UserWarning, match="outside the intended range"):
            smoothed_tv(phi, 1.5)


class TestLpNorm:
    def test_constant_l2(self, cube8):
        phi = ScalarField(cube8, np.full(cube8.shape, 2.0))
        assert lp_norm(phi, 2) == pytest.approx(2.0, rel=1e-13)

    def test_zero_field_all_orders(self, cube8):
        phi = ScalarField(cube8, np.zeros(cube8.shape))
        for p in (1, 2, 4, math.inf):
            assert lp_norm(phi, p) == 0.0

    def test_l4_matches_summation_oracle(self, cube8):
        phi = random_field(cube8, seed=11)
        expect = (np.sum(np.abs(phi.values) ** 4) * cube8.quad_weight) ** 0.25
        assert lp_norm(phi, 4) == pytest.approx(expect, rel=1e-14)

    def test_unsupported_order_rejected(self, cube8):
        with pytest.raises(ValueError, match="unsupported"):
            lp_norm(random_field(cube8, 0), 3)


class TestBvNorm:
    def test_constant_unit_volume(self, cube8):
        phi = ScalarField(cube8, np.ones(cube8.shape))
        assert bv_norm(phi) == pytest.approx(1.0, rel=1e-13)

    def test_zero_field(self, cube8):
        assert bv_norm(ScalarField(cube8, np.zeros(cube8.shape))) == 0.0

    def test_is_l1_plus_tv_exactly(self, cube8):
        phi = random_field(cube8, seed=13)
        assert bv_norm(phi) == lp_norm(phi, 1) + tv(phi)


class TestHolder:
    def test_constant_is_zero(self, cube8):
        phi = ScalarField(cube8, np.full(cube8.shape, 3.3))
        for gamma in (0.25, 0.5, 1.0):
            assert float(holder_coefficient(phi, gamma)) == 0.0

    def test_ramp_lipschitz(self, cube8):
        coeff = holder_coefficient(ramp_field(cube8, 2.0), 1.0)
        assert float(coeff) == pytest.approx(2.0, abs=1e-12)
        assert not coeff.lower_bound

    def test_ramp_quarter_exponent(self, cube8):
        # 2d / d^(1/4) = 2 d^(3/4) peaks at the axis-aligned unit distance
        coeff = holder_coefficient(ramp_field(cube8, 2.0), 0.25)
        assert float(coeff) == pytest.approx(2.0, abs=1e-12)

    def test_exhaustive_equals_pair_oracle(self):
        g = Grid.regular((5, 4, 4), (1.0, 0.7, 1.2))
        phi = random_field(g, seed=17)
        for gamma in (0.25, 1.0):
            assert float(holder_coefficient(phi, gamma)) == pytest.approx(
                pair_oracle_holder(phi, gamma), rel=1e-15)

    def test_sampled_lower_bound_on_large_grid(self):
        g = Grid.regular((20, 20, 20), (1.0, 1.0, 1.0))  # 8000 > threshold
        coeff = holder_coefficient(ramp_field(g, 2.0), 1.0)
        assert coeff.lower_bound
        # neighbor pairs along the ramp axis realize the true coefficient
        assert float(coeff) == pytest.approx(2.0, rel=1e-12)

    def test_gamma_out_of_range_rejected(self, cube8):
        phi = random_field(cube8, seed=1)
        for gamma in (0.0, -1.0, 1.5):
            with pytest.raises(ValueError):
                holder_coefficient(phi, gamma)

    def test_holder_norm_constant(self, cube8):
        phi = ScalarField(cube8, np.full(cube8.shape, 5.0))
        assert holder_norm(phi, 0.5) == pytest.approx(5.0, rel=1e-13)

    def test_holder_norm_ramp(self, cube8):
        assert holder_norm(ramp_field(cube8, 2.0), 1.0) == pytest.approx(
            4.0, abs=1e-11)

    def test_holder_norm_zero(self, cube8):
        assert holder_norm(ScalarField(cube8, np.zeros(cube8.shape)), 1.0) == 0.0


class TestInvariants:
    """Property tests for the algebraic invariants of the module."""

    @given(seed=st.integers(0, 10_000), c=st.floats(-8.0, 8.0))
    @settings(max_examples=30, deadline=None)
    def test_shift_invariance(self, seed, c):
        g = Grid.regular((5, 5), (1.0, 1.0))
        phi = random_field(g, seed)
        shifted = ScalarField(g, phi.values + c)
        assert tv(shifted) == pytest.approx(tv(phi), rel=1e-10, abs=1e-12)
        assert smoothed_tv(shifted, 0.1) == pytest.approx(
            smoothed_tv(phi, 0.1), rel=1e-10)
        assert np.allclose(gradient(shifted).components,
                           gradient(phi).components, atol=1e-12)

    @given(seed=st.integers(0, 10_000),
           c=st.floats(-8.0, 8.0).filter(lambda x: abs(x) > 1e-3),
           gamma=st.sampled_from([0.25, 0.5, 1.0]))
    @settings(max_examples=30, deadline=None)
    def test_holder_scaling_homogeneity(self, seed, c, gamma):
        g = Grid.regular((4, 4), (1.0, 1.0))
        phi = random_field(g, seed)
        scaled = ScalarField(g, c * phi.values)
        assert float(holder_coefficient(scaled, gamma)) == pytest.approx(
            abs(c) * float(holder_coefficient(phi, gamma)), rel=1e-12)

    @given(seed=st.integers(0, 10_000), beta=st.floats(1e-6, 0.99))
    @settings(max_examples=30, deadline=None)
    def test_smoothed_tv_sandwich(self, seed, beta):
        g = Grid.regular((5, 5), (1.0, 1.0))
        phi = random_field(g, seed)
        low = tv(phi)
        mid = smoothed_tv(phi, beta)
        high = low + math.sqrt(beta) * g.volume
        assert low <= mid <= high * (1 + 1e-12)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_adjointness_random(self, seed):
        g = Grid.regular((4, 5), (0.8, 1.1))
        rng = np.random.default_rng(seed)
        u = ScalarField(g, rng.normal(size=g.shape))
        p = VectorField(g, rng.normal(size=(2,) + g.shape))
        lhs = inner(gradient(u), p)
        rhs = -inner(u, divergence(p))
        assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + abs(rhs) + 1e-30)
