import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import gauss_integral

from hls import marchenko as mk, numlin, oracle
from hls.errors import GridTooCoarseError, SolverError, ValidationError

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def _random_hermitian(rng, n, lo=0.0, hi=5.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return (q * rng.uniform(lo, hi, n)) @ q.conj().T


class TestHermitian:
    def test_identity(self):
        assert numlin.is_hermitian(np.eye(3), 0.0)

    def test_catalog_matrix_c(self):
        assert numlin.is_hermitian(oracle.MATEXP_C, 0.0)

    def test_antisymmetric(self):
        assert not numlin.is_hermitian(np.array([[0.0, 1.0], [-1.0, 0.0]]), 1e-12)

    def test_non_square(self):
        with pytest.raises(ValidationError):
            numlin.is_hermitian(np.ones((2, 3)))


class TestMatExp:
    def test_zero(self):
        assert np.allclose(numlin.mat_exp(np.zeros((3, 3)), 2.7), np.eye(3), atol=0)

    def test_diagonal(self):
        E = numlin.mat_exp(np.diag([1.0, 2.0]), 1.0)
        assert np.allclose(E, np.diag([np.exp(-1), np.exp(-2)]), atol=1e-15)

    def test_catalog_closed_form(self):
        for y in (0.0, 0.5, 3.0):
            assert np.max(np.abs(numlin.mat_exp(oracle.MATEXP_A, y) - oracle.matexp_exp(y))) <= 1e-14

    def test_defective_matrix_uses_fallback(self):
        M = np.array([[1.0, 1.0], [0.0, 1.0]])
        expected = np.exp(-2.0) * np.array([[1.0, -2.0], [0.0, 1.0]])
        assert np.allclose(numlin.mat_exp(M, 2.0), expected, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0, 2), st.floats(0, 2))
    def test_semigroup(self, seed, s, t):
        M = _random_hermitian(np.random.default_rng(seed), 3)
        lhs = numlin.mat_exp(M, s) @ numlin.mat_exp(M, t)
        assert np.max(np.abs(lhs - numlin.mat_exp(M, s + t))) <= 1e-10


class TestSylvester:
    def test_identity(self):
        assert np.allclose(numlin.sylvester_solve(np.eye(2), np.eye(2), 2 * np.eye(2)), np.eye(2))

    def test_catalog_m(self):
        a, c = oracle.MATEXP_A, oracle.MATEXP_C
        assert np.max(np.abs(numlin.sylvester_solve(a, a, c @ c) - oracle.MATEXP_M)) <= 1e-14

    def test_quadrature_oracle(self):
        rng = np.random.default_rng(3)
        A = _random_hermitian(rng, 2, 0.5, 2.0)
        C = _random_hermitian(rng, 2, -1.0, 1.0)
        X = numlin.sylvester_solve(A, A, C)

        def integrand(y):
            return np.array([numlin.mat_exp(A, t) @ C @ numlin.mat_exp(A, t) for t in y])

        ref = sum(gauss_integral(integrand, a, a + 5, 60) for a in np.arange(0, 40, 5))
        assert np.max(np.abs(X - ref)) <= 1e-8

    def test_spectral_collision(self):
        with pytest.raises(SolverError):
            numlin.sylvester_solve(np.diag([1.0, 2.0]), np.diag([-1.0, 3.0]), np.eye(2))

    def test_large_system_path(self):
        rng = np.random.default_rng(1)
        A = _random_hermitian(rng, 20, 1, 3)
        C = rng.normal(size=(20, 20))
        X = numlin.sylvester_solve(A, A, C)
        assert np.max(np.abs(A @ X + X @ A - C)) <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 4))
    def test_residual(self, seed, n):
        rng = np.random.default_rng(seed)
        A = _random_hermitian(rng, n, 0.1, 4)
        B = _random_hermitian(rng, n, 0.1, 4)
        C = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        X = numlin.sylvester_solve(A, B, C)
        r = np.linalg.norm(A @ X + X @ B - C)
        bound = 1e-12 * (np.linalg.norm(A) + np.linalg.norm(B)) * np.linalg.norm(X) + 1e-12 * np.linalg.norm(C)
        assert r <= 10 * bound


class TestNullspace:
    def test_identity(self):
        assert numlin.nullspace(np.eye(3))[1] == 0

    def test_rank_one(self):
        basis, k = numlin.nullspace(np.ones((2, 2)))
        assert k == 1
        v = basis[:, 0] / basis[0, 0]
        assert np.allclose(v, [1, -1])

    def test_boundary_system_of_sech2(self):
        ex = oracle.get_example("sech2_dirichlet")
        M = mk.boundary_system(np.array([[-1.0]]), np.array([[2.0]]), np.array([[-1.0]]))
        assert numlin.nullspace(M)[1] == 1
        assert ex.extra["G1"] == 2.0

    def test_negative_tolerance(self):
        with pytest.raises(ValidationError):
            numlin.nullspace(np.eye(2), -1.0)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=finite), st.integers(0, 2))
    def test_basis_properties(self, M, drop):
        M = M.copy()
        M[:, :drop] = 0.0
        tol = 1e-8
        basis, k = numlin.nullspace(M, tol)
        assert np.allclose(basis.conj().T @ basis, np.eye(k), atol=1e-12)
        norm = np.linalg.norm(M, 2)
        for v in basis.T:
            assert np.linalg.norm(M @ v) <= 10 * tol * norm + 1e-300
        assert k >= drop


class TestInvSqrt:
    def test_identity(self):
        assert np.allclose(numlin.inv_sqrt_psd(np.eye(2)), np.eye(2))

    def test_diagonal(self):
        assert np.allclose(numlin.inv_sqrt_psd(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]))

    def test_offdiag_normalization(self):
        # the B matrix of the first bound state of the non-unitary 2x2 example
        r = np.sqrt(13)
        d, o = (905 * r - 2798) / 774, -(3572 - 905 * r) / 774
        B1 = np.array([[d, o], [o, d]])
        X = numlin.inv_sqrt_psd(B1)
        assert np.max(np.abs(X @ B1 @ X - np.eye(2))) <= 1e-10
        P1 = np.ones((2, 2)) / 2
        assert np.max(np.abs(X @ P1 - oracle.OFFDIAG_MS[0])) <= 1e-6

    def test_rejects_indefinite(self):
        with pytest.raises(ValidationError):
            numlin.inv_sqrt_psd(np.diag([1.0, -1.0]))

    def test_rejects_nonhermitian(self):
        with pytest.raises(ValidationError):
            numlin.inv_sqrt_psd(np.array([[1.0, 1.0], [0.0, 1.0]]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_commutes_with_projector(self, seed):
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        w = rng.uniform(0.5, 4, 3)
        M = (q * w) @ q.conj().T
        P = q[:, :1] @ q[:, :1].conj().T
        X = numlin.inv_sqrt_psd(M)
        assert np.max(np.abs(X @ P - P @ X)) <= 1e-10


class TestArgDet:
    def test_constant_path(self):
        assert numlin.arg_det_unwrap([np.eye(2) * 1j] * 5) == 0.0

    def test_single_pole_phase(self):
        ks = np.geomspace(40, 1e-3, 2000)
        S = -(ks + 1j) / (ks - 1j)
        exact = 2 * (np.arctan(1 / ks[-1]) - np.arctan(1 / ks[0]))
        assert abs(numlin.arg_det_unwrap(S[:, None, None]) - exact) <= 1e-10
        assert abs(exact - np.pi) <= 0.06

    def test_double_pole_phase(self):
        ks = np.geomspace(40, 1e-3, 2000)
        S = ((ks - 1j) / (ks + 1j)) ** 2
        exact = -4 * (np.arctan(1 / ks[-1]) - np.arctan(1 / ks[0]))
        assert abs(numlin.arg_det_unwrap(S[:, None, None]) - exact) <= 1e-10

    def test_coarse_path(self):
        with pytest.raises(GridTooCoarseError):
            numlin.arg_det_unwrap(np.array([1.0, -1.0])[:, None, None])
