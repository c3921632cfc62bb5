import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma, gammaincc

from oracles import gauss_integral

from hls import direct, marchenko as mk, oracle
from hls.errors import BoundaryRecoveryError, MarchenkoSingularError
from hls.model import BoundaryPair, Grid, ScatteringData, as_terms, boundary_equivalent

Y = np.array([0.1, 0.5, 1.0, 2.5, 6.0])


def ex(name):
    return oracle.get_example(name)


def _empty(n=1):
    return ScatteringData.analytic(np.eye(n))


class TestDataFunctions:
    def test_fs_sech2(self):
        data = ex("sech2_dirichlet").data
        assert np.allclose(mk.fs_eval(data, Y)[:, 0, 0], 2 * np.exp(-Y), atol=1e-15)
        assert np.allclose(mk.fs_eval(data, -Y), 0)

    def test_fs_empty(self):
        assert np.all(mk.fs_eval(_empty(2), Y) == 0)

    def test_fs_one_bs_family(self):
        data = ex("one_bs_family").data
        assert np.allclose(mk.fs_eval(data, Y)[:, 0, 0], 4 * (Y - 1) * np.exp(-Y), atol=1e-14)

    def test_f_values(self):
        assert np.allclose(mk.f_eval(ex("sech2_dirichlet").data, Y)[:, 0, 0], 2 * np.exp(-Y))
        assert np.allclose(mk.f_eval(ex("free_one_bs").data, Y), 0, atol=1e-14)
        assert np.allclose(mk.f_eval(ex("one_bs_family").data, Y)[:, 0, 0], 4 * Y * np.exp(-Y), atol=1e-14)

    def test_s_from_data(self):
        ks = np.linspace(-5, 5, 23)
        S = mk.s_from_data(ex("sech2_dirichlet").data, ks)[:, 0, 0]
        assert np.max(np.abs(S + (ks + 1j) / (ks - 1j))) <= 1e-12
        S = mk.s_from_data(ex("levinson_violation").data, ks)[:, 0, 0]
        assert np.max(np.abs(S - ((ks - 1j) / (ks + 1j)) ** 2)) <= 1e-12
        assert np.allclose(mk.s_from_data(_empty(2), ks), np.eye(2))

    @pytest.mark.parametrize("name", [r[0] for r in oracle.list_examples() if r[0] != "matexp_3x3"])
    def test_s_from_data_matches_closed_form(self, name):
        e = ex(name)
        ks = np.linspace(0.1, 5, 9)
        ref = np.array([np.atleast_2d(e.S_closed(k)) for k in ks])
        assert np.max(np.abs(mk.s_from_data(e.data, ks) - ref)) <= 1e-12

    def test_g1(self):
        assert mk.g1_from_data(ex("sech2_dirichlet").data)[0, 0] == 2
        assert mk.g1_from_data(ex("free_one_bs").data)[0, 0] == -2
        assert np.all(mk.g1_from_data(_empty()) == 0)

    @pytest.mark.parametrize("m", [0, 1, 3])
    def test_incomplete_gamma(self, m):
        ref = gammaincc(m + 1, 1.7 * 0.4) * gamma(m + 1) / 1.7 ** (m + 1)
        assert mk.incomplete_gamma_int(m, 1.7, 0.4) == pytest.approx(ref, rel=1e-12)

    def test_hermitian_f(self):
        for name in ("two_bs_2x2", "rank2_bs_2x2", "nonunitary_offdiag"):
            F = mk.f_eval(ex(name).data, Y)
            assert np.max(np.abs(F - np.conj(np.swapaxes(F, 1, 2)))) <= 1e-14


class TestSeparable:
    def test_sech2_kernel(self):
        data = ex("sech2_dirichlet").data
        for x in (0.0, 0.7, 2.0):
            sol = mk.solve_marchenko_separable(data, x)
            y = x + Y
            assert np.max(np.abs(sol.K(y)[:, 0, 0] + np.exp(-y) / np.cosh(x))) <= 1e-13
        assert mk.solve_marchenko_separable(data, 0.0).K_diag[0, 0] == pytest.approx(-1, abs=1e-14)

    def test_zero_kernel(self):
        sol = mk.solve_marchenko_separable(ex("free_one_bs").data, 0.3)
        assert np.allclose(sol.K(Y), 0, atol=1e-14)

    def test_matrix_exponential_kernel(self):
        e = ex("matexp_3x3")
        for x in (0.0, 0.4, 1.5):
            y = x + Y
            sol = mk.solve_marchenko_separable(e.data, x)
            assert np.max(np.abs(sol.K(y) - e.K_closed(x, y))) <= 1e-9

    @pytest.mark.parametrize("name", ["two_bs_2x2", "rank2_bs_2x2", "nonunitary_offdiag", "one_bs_family"])
    def test_catalog_kernels(self, name):
        e = ex(name)
        for x in (0.0, 1.0):
            sol = mk.solve_marchenko_separable(e.data, x)
            assert np.max(np.abs(sol.K(x + Y) - e.K_closed(x, x + Y))) <= 1e-9
            assert mk.marchenko_residual(e.data, sol) <= 1e-8
            assert np.max(np.abs(sol.K_diag - sol.K_diag.conj().T)) <= 1e-8

    def test_singular_at_origin(self):
        with pytest.raises(MarchenkoSingularError) as info:
            mk.solve_marchenko_separable(ex("marchenko_singular").data, 0.0)
        assert info.value.x == 0.0

    def test_decay_bound(self):
        # |K(x,y)| <= C tau(x+y) with tau(x) = int_x^inf |F'|
        data = ex("one_bs_family").data

        def tau(t):
            if t < 1:
                return quad(lambda z: 4 * (1 - z) * np.exp(-z), t, 1)[0] + tau(1.0)
            return quad(lambda z: 4 * (z - 1) * np.exp(-z), t, np.inf)[0]

        # far out K is close to -F, so a point there fixes the constant
        pts = [(4.0, 4.0)] + [(x, x + d) for x in np.linspace(0, 3, 10) for d in (0.0, 0.5, 1.5, 3.0, 6.0)]
        norms = [np.linalg.norm(mk.solve_marchenko_separable(data, x).K([y])[0], 2) for x, y in pts]
        C = 1.5 * norms[0] / tau(8.0)
        assert all(nm <= C * tau(x + y) for nm, (x, y) in zip(norms[1:], pts[1:]))


class TestDerivative:
    def test_sech2(self):
        data = ex("sech2_dirichlet").data
        sol = mk.solve_marchenko_separable(data, 1.0)
        mk.solve_derivative_marchenko(data, 1.0, sol)
        ref = np.exp(-2.0) * np.tanh(1.0) / np.cosh(1.0)
        assert abs(sol.Kx([2.0])[0, 0, 0] - ref) <= 1e-12

    def test_zero(self):
        data = ex("free_one_bs").data
        sol = mk.solve_marchenko_separable(data, 0.5)
        mk.solve_derivative_marchenko(data, 0.5, sol)
        assert np.allclose(sol.Kx(Y), 0, atol=1e-14)

    @pytest.mark.parametrize("name", ["one_bs_family", "two_bs_2x2"])
    def test_central_difference(self, name):
        data = ex(name).data
        x, h = 0.6, 1e-4
        sol = mk.solve_marchenko_separable(data, x)
        mk.solve_derivative_marchenko(data, x, sol)
        y = x + h + Y
        fd = (mk.solve_marchenko_separable(data, x + h).K(y) - mk.solve_marchenko_separable(data, x - h).K(y)) / (2 * h)
        assert np.max(np.abs(sol.Kx(y) - fd)) <= 1e-5

    def test_requires_derivative(self):
        sol = mk.solve_marchenko_separable(ex("sech2_dirichlet").data, 0.0)
        with pytest.raises(Exception, match="K_x"):
            sol.Kx(Y)


class TestNystrom:
    def test_sech2(self):
        data = ex("sech2_dirichlet").data
        sol = mk.solve_marchenko_nystrom(lambda z: mk.f_eval(data, z), 0.0, Grid(0.0, 0.005, 4001))
        assert np.max(np.abs(sol.values[:, 0, 0] + np.exp(-sol.y))) <= 1e-4

    def test_zero(self):
        data = ex("free_one_bs").data
        sol = mk.solve_marchenko_nystrom(lambda z: mk.f_eval(data, z), 0.0, Grid(0.0, 0.05, 101))
        # F is -2e^{-y} + 2e^{-y}, zero up to rounding
        assert np.max(np.abs(sol.values)) <= 1e-14

    def test_agrees_with_separable(self):
        data = ex("one_bs_family").data
        for x in (0.0, 0.5, 1.0, 2.0):
            ny = mk.solve_marchenko_nystrom(lambda z: mk.f_eval(data, z), x, Grid(0.0, 0.02, 1501))
            sep = mk.solve_marchenko_separable(data, x)
            assert np.max(np.abs(ny.values - sep.K(ny.y))) <= 1e-4

    def test_singular(self):
        # the discretized operator is only nearly singular; the solution blows up
        data = ex("marchenko_singular").data
        try:
            sol = mk.solve_marchenko_nystrom(lambda z: mk.f_eval(data, z), 0.0, Grid(0.0, 0.02, 1001))
        except MarchenkoSingularError:
            return
        assert np.max(np.abs(sol.K_diag)) > 1e2

    def test_singular_operator_raises(self):
        F = lambda z: np.full((np.size(z), 1, 1), -1.0 / 0.02)  # noqa: E731
        with pytest.raises(MarchenkoSingularError):
            mk.solve_marchenko_nystrom(F, 0.0, Grid(0.0, 0.02, 2), richardson=False)


class TestPotential:
    def test_sech2(self):
        V = mk.recover_potential(ex("sech2_dirichlet").data, Grid.spanning(0, 8, 0.02))
        x = V.grid.points
        assert np.max(np.abs(V.values[:, 0, 0] + 2 / np.cosh(x) ** 2)) <= 1e-6

    def test_zero(self):
        V = mk.recover_potential(ex("free_one_bs").data, Grid.spanning(0, 8, 0.1))
        assert np.allclose(V.values, 0, atol=1e-12)

    @pytest.mark.parametrize("name", ["two_bs_2x2", "rank2_bs_2x2", "one_bs_family", "matexp_3x3"])
    def test_catalog(self, name):
        e = ex(name)
        V = mk.recover_potential(e.data, Grid.spanning(0, 8, 0.02))
        x = V.grid.points
        assert np.max(np.abs(V.values - e.potential(x))) <= 1e-6
        assert np.max(np.abs(V.values - np.conj(np.swapaxes(V.values, 1, 2)))) <= 1e-8

    def test_rank_two_closed_form(self):
        x = np.linspace(0, 8, 161)
        V = mk.recover_potential(ex("rank2_bs_2x2").data, Grid.spanning(0, 8, 0.05))
        e = np.exp(2 * x / 3)
        ref = -(8 * e / (9 * (2 + e) ** 2))[:, None, None] * oracle.ONES
        assert np.max(np.abs(V.values - ref)) <= 1e-6

    def test_partial_recovery(self):
        rec = mk.recover_potential(ex("marchenko_singular").data, Grid.spanning(0, 4, 0.02), partial=True)
        assert list(rec.failed_x) == [0.0]
        assert rec.potential.grid.start == pytest.approx(0.02)


class TestJostFromKernel:
    def test_zero_kernel(self):
        data = ex("free_one_bs").data
        K0 = mk.solve_marchenko_separable(data, 0.0)
        mk.solve_derivative_marchenko(data, 0.0, K0)
        f0, fp0, _ = mk.jost_from_kernel(K0, 1.3)
        assert np.allclose(f0, 1) and np.allclose(fp0, 1.3j)

    def test_sech2(self):
        data = ex("sech2_dirichlet").data
        K0 = mk.solve_marchenko_separable(data, 0.0)
        mk.solve_derivative_marchenko(data, 0.0, K0)
        ks = np.array([0.5, 2.0])
        f0, _, J = mk.jost_from_kernel(K0, ks, BoundaryPair.dirichlet())
        assert np.max(np.abs(f0[:, 0, 0] - ks / (ks + 1j))) <= 1e-12
        assert np.max(np.abs(J[:, 0, 0] - ks / (ks + 1j))) <= 1e-12

    def test_agrees_with_direct(self):
        e = ex("two_bs_2x2")
        K0 = mk.solve_marchenko_separable(e.data, 0.0)
        mk.solve_derivative_marchenko(e.data, 0.0, K0)
        ks = np.array([0.4, 1.7])
        _, _, J = mk.jost_from_kernel(K0, ks, e.boundary)
        assert np.max(np.abs(J - direct.jost_matrix_at(e.potential, e.boundary, ks))) <= 1e-7

    def test_two_pole_bound_state(self):
        # J(k) = (k-i)/(k+2i) up to normalization: J(i)^dagger M = 0
        e = ex("scalar_two_pole")
        inv = mk.invert(e.data)
        _, _, J = mk.jost_from_kernel(inv.K0, 1j, inv.boundary)
        M = e.data.bound_states.states[0].M
        assert np.max(np.abs(J.conj().T @ M)) <= 1e-10
        _, _, J2 = mk.jost_from_kernel(inv.K0, 2.0, inv.boundary)
        ratio = J2[0, 0] / ((2 - 1j) / (2 + 2j))
        _, _, J3 = mk.jost_from_kernel(inv.K0, 0.5, inv.boundary)
        assert abs(J3[0, 0] / ((0.5 - 1j) / (0.5 + 2j)) - ratio) <= 1e-10


class TestBoundary:
    def test_dirichlet(self):
        pair = mk.recover_boundary(-np.eye(1), 2 * np.eye(1), -np.eye(1))
        assert boundary_equivalent(pair, BoundaryPair.dirichlet())

    def test_robin(self):
        pair = mk.recover_boundary(np.eye(1), -2 * np.eye(1), np.zeros((1, 1)))
        assert boundary_equivalent(pair, BoundaryPair(np.eye(1), -np.eye(1)))

    def test_two_bs(self):
        e = ex("two_bs_2x2")
        K00 = mk.solve_marchenko_separable(e.data, 0.0).K_diag
        pair = mk.recover_boundary(e.data.S_inf, mk.g1_from_data(e.data), K00)
        ref = BoundaryPair(np.eye(2), -np.array([[15.0, 1.0], [1.0, 15.0]]) / 6)
        assert boundary_equivalent(pair, ref)

    def test_nullity_mismatch(self):
        e = ex("nonsym_2x2")
        K00 = mk.solve_marchenko_separable(e.data, 0.0).K_diag
        with pytest.raises(BoundaryRecoveryError) as info:
            mk.recover_boundary(e.data.S_inf, mk.g1_from_data(e.data), K00)
        assert info.value.nullity != 2


class TestInvert:
    def test_sech2(self):
        inv = mk.invert(ex("sech2_dirichlet").data)
        assert inv.complete and boundary_equivalent(inv.boundary, BoundaryPair.dirichlet())
        assert inv.diagnostics["marchenko_residual"] <= 1e-8

    def test_one_bs_family(self):
        e = ex("one_bs_family")
        inv = mk.invert(e.data)
        assert boundary_equivalent(inv.boundary, BoundaryPair(np.eye(1), -4 * np.eye(1)))
        x = np.linspace(0, 8, 81)
        assert np.max(np.abs(inv.potential(x) - e.potential(x))) <= 1e-5

    def test_rank2(self):
        inv = mk.invert(ex("rank2_bs_2x2").data)
        ref = BoundaryPair(np.eye(2), np.array([[-17.0, 1.0], [1.0, -17.0]]) / 18)
        assert boundary_equivalent(inv.boundary, ref)

    def test_singular_kernel_gives_partial_result(self):
        inv = mk.invert(ex("marchenko_singular").data)
        assert not inv.complete
        stages = [s for s, _ in inv.errors]
        assert stages == ["potential", "kernel"]
        assert inv.potential is not None and inv.boundary is None

    def test_sampled_data(self):
        e = ex("sech2_dirichlet")
        kg = Grid(0.02, 0.02, 2500)
        S = mk.s_from_data(e.data, kg.points)
        data = ScatteringData.sampled(kg, S, e.data.S_inf)
        inv = mk.invert(data, Grid.spanning(0, 2, 0.1))
        x = inv.potential.grid.points
        # truncated transform plus finite differences: a coarse path
        assert np.max(np.abs(inv.potential.values[:, 0, 0] + 2 / np.cosh(x) ** 2)) <= 0.05
        assert boundary_equivalent(inv.boundary, BoundaryPair.dirichlet(), 0.05)
        assert np.max(np.abs(mk.fs_eval(data, Y)[:, 0, 0] - 2 * np.exp(-Y))) <= 1e-2
