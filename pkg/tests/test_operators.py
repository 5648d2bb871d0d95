import numpy as np
import pytest

from tvreg import (
    DenseMatrix,
    GaussianBlur,
    Grid,
    Identity,
    ScalarField,
    adjoint_test,
    operator_norm,
    parse_operator,
)
from tvreg.io import write_matrix_tvm
from helpers import jacobi_eigenvalues, random_field


@pytest.fixture
def square16():
    return Grid.regular((16, 16), (1.0, 1.0))


@pytest.fixture
def tiny():
    # smallest legal grid: four points
    return Grid.regular((2, 2), (1.0, 1.0))


class TestApply:
    def test_identity(self, square16):
        u = random_field(square16, 0)
        assert np.array_equal(Identity(square16).apply(u).values, u.values)

    def test_blur_preserves_constants_periodic(self, square16):
        T = GaussianBlur(square16, sigma=0.1, boundary="periodic")
        u = ScalarField(square16, np.full(square16.shape, 3.7))
        assert np.allclose(T.apply(u).values, 3.7, atol=1e-12)

    def test_blur_kernels_have_unit_sum(self, square16):
        T = GaussianBlur(square16, sigma=0.07)
        for k in T._kernels:
            assert np.sum(k) == pytest.approx(1.0, rel=1e-14)

    def test_dense_block_matrix(self, tiny):
        # [[1,2],[3,4]] acting on the first two coordinates, twice over
        M = np.array([[1.0, 2, 0, 0], [3, 4, 0, 0],
                      [0, 0, 1, 2], [0, 0, 3, 4]])
        T = DenseMatrix(M, tiny)
        u = ScalarField(tiny, np.ones(tiny.shape))
        assert np.allclose(T.apply(u).values.ravel(), [3.0, 7.0, 3.0, 7.0])

    def test_linearity(self, square16):
        T = GaussianBlur(square16, sigma=0.09, boundary="zero")
        u, v = random_field(square16, 1), random_field(square16, 2)
        lhs = T.apply_array(2.0 * u.values - 3.0 * v.values)
        rhs = 2.0 * T.apply_array(u.values) - 3.0 * T.apply_array(v.values)
        assert np.allclose(lhs, rhs, atol=1e-13)

    def test_grid_mismatch_rejected(self, square16, tiny):
        T = Identity(square16)
        with pytest.raises(ValueError, match="domain grid"):
            T.apply(random_field(tiny, 0))


class TestAdjoint:
    def test_identity_adjoint(self, square16):
        v = random_field(square16, 3)
        assert np.array_equal(Identity(square16).adjoint_apply(v).values, v.values)

    def test_blur_self_adjoint(self, square16):
        T = GaussianBlur(square16, sigma=0.08, boundary="periodic")
        assert adjoint_test(T, trials=20) < 1e-12

    def test_dense_adjoint_is_transpose(self, tiny):
        rng = np.random.default_rng(4)
        M = rng.normal(size=(4, 4))
        T = DenseMatrix(M, tiny)
        v = random_field(tiny, 5)
        expect = M.T @ v.values.ravel()  # same grid: weight ratio is one
        got = T.adjoint_apply(v).values.ravel()
        assert np.allclose(got, expect, rtol=1e-14)

    def test_dense_adjoint_across_grids(self):
        dom = Grid.regular((2, 3), (1.0, 1.0))
        ran = Grid.regular((2, 2), (2.0, 1.0))
        M = np.random.default_rng(6).normal(size=(4, 6))
        T = DenseMatrix(M, dom, ran)
        assert adjoint_test(T, trials=10) < 1e-13

    def test_wrong_adjoint_detected(self, tiny):
        # negative control: "adjoint" that skips the transpose
        class WrongAdjoint(DenseMatrix):
            def adjoint_array(self, vals):
                return self.apply_array(vals)

        M = np.random.default_rng(7).normal(size=(4, 4))
        T = WrongAdjoint(M, tiny)
        assert adjoint_test(T, trials=10) > 1e-3


class TestOperatorNorm:
    def test_identity(self, square16):
        est = operator_norm(Identity(square16))
        assert est.value == pytest.approx(1.0, abs=1e-12)
        assert est.converged

    def test_dense_diagonal(self, tiny):
        T = DenseMatrix(np.diag([3.0, 1.0, 1.0, 1.0]), tiny)
        est = operator_norm(T, tol=1e-12)
        assert est.value == pytest.approx(3.0, abs=1e-10)

    def test_random_matrix_against_jacobi_oracle(self):
        g = Grid.regular((2, 5), (1.0, 1.0))  # ten points
        M = np.random.default_rng(8).normal(size=(10, 10))
        est = operator_norm(DenseMatrix(M, g), tol=1e-12, max_iter=50_000)
        oracle = float(np.sqrt(jacobi_eigenvalues(M.T @ M)[-1]))
        assert est.value == pytest.approx(oracle, rel=1e-8)

    def test_blur_is_contraction(self, square16):
        est = operator_norm(GaussianBlur(square16, sigma=0.1))
        assert est.value <= 1.0 + 1e-10

    def test_norm_invariant_under_adjoint(self, tiny):
        M = np.random.default_rng(9).normal(size=(4, 4))
        a = operator_norm(DenseMatrix(M, tiny), tol=1e-12).value
        b = operator_norm(DenseMatrix(M.T, tiny), tol=1e-12).value
        assert a == pytest.approx(b, abs=1e-10)

    def test_nonconvergence_flagged(self, square16):
        est = operator_norm(GaussianBlur(square16, sigma=0.02), tol=1e-14,
                            max_iter=2)
        assert not est.converged
        assert est.residual >= 1e-14

    def test_bad_tolerance_rejected(self, square16):
        with pytest.raises(ValueError):
            operator_norm(Identity(square16), tol=0.0)


class TestAdjointTestValues:
    def test_identity_defect_tiny(self, square16):
        assert adjoint_test(Identity(square16)) < 1e-15

    def test_zero_boundary_blur(self, square16):
        assert adjoint_test(GaussianBlur(square16, 0.06, "zero"), 20) < 1e-12


class TestParseOperator:
    def test_identity_spec(self, square16):
        assert parse_operator("identity", square16).kind == "identity"

    def test_blur_spec(self, square16):
        T = parse_operator("blur:sigma=0.05,boundary=zero", square16)
        assert T.kind == "gaussian_blur"
        assert T.sigma == 0.05
        assert T.boundary == "zero"

    def test_matrix_spec(self, tiny, tmp_path):
        M = np.random.default_rng(10).normal(size=(4, 4))
        path = tmp_path / "m.tvm"
        write_matrix_tvm(path, M)
        T = parse_operator(f"matrix:path={path}", tiny)
        assert np.allclose(T.matrix, M)

    @pytest.mark.parametrize("spec", [
        "unknown", "blur:sigma=0.1,extra=1", "blur:sigma",
        "blur:sigma=0.1,boundary=reflect",
    ])
    def test_bad_specs_rejected(self, spec, square16):
        with pytest.raises(ValueError):
            parse_operator(spec, square16)
