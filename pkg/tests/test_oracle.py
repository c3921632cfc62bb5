import dataclasses

import numpy as np
import pytest

from oracles import gauss_integral

from hls import marchenko as mk, numlin, oracle
from hls.errors import ValidationError

NAMES = [r[0] for r in oracle.list_examples()]
WITH_K_AND_V = [n for n in NAMES if oracle.get_example(n).K_closed is not None
                and oracle.get_example(n).potential is not None
                and oracle.get_example(n).potential.variant == "catalog"]
WITH_K = [n for n in NAMES if oracle.get_example(n).K_closed is not None]
WITH_JOST = [n for n in NAMES if oracle.get_example(n).jost_closed is not None
             and oracle.get_example(n).K_closed is not None]


def _points(ex):
    # K(0, .) does not exist where the Marchenko equation is singular at x = 0
    return (0.5, 1.5) if ex.expected.get("4c") == oracle.FAIL else (0.0, 0.5, 1.5)


def test_listing():
    listing = oracle.list_examples()
    assert len(listing) >= 15
    assert listing == oracle.list_examples()
    verdicts = {name: overall for name, _, overall in listing}
    assert verdicts["sech2_dirichlet"] == oracle.PASS
    assert verdicts["levinson_violation"] == oracle.FAIL


def test_unknown_name():
    with pytest.raises(ValidationError, match="unknown example"):
        oracle.get_example("nope")


def test_entries_are_frozen():
    ex = oracle.get_example("sech2_dirichlet")
    with pytest.raises(dataclasses.FrozenInstanceError):
        ex.name = "other"
    assert oracle.get_example("sech2_dirichlet") is ex


def test_named_entries():
    ex = oracle.get_example("free_one_bs")
    assert ex.potential.is_zero
    assert ex.data.bound_states.states[0].kappa == 1.0
    assert ex.data.bound_states.states[0].M[0, 0] == pytest.approx(np.sqrt(2))
    assert np.allclose(ex.boundary.B, -ex.boundary.A)
    sing = oracle.get_example("marchenko_singular")
    x = np.array([0.3, 1.0, 2.0])
    assert np.allclose(sing.potential(x)[:, 0, 0], 8 * np.exp(2 * x) / (np.exp(2 * x) - 1) ** 2)


def test_marchenko_class_flags():
    names = {e.name for e in oracle.marchenko_class_examples()}
    assert "sech2_dirichlet" in names and "marchenko_singular" not in names
    for e in oracle.marchenko_class_examples():
        assert e.overall == oracle.PASS


@pytest.mark.parametrize("name", [n for n in NAMES if oracle.get_example(n).S_closed is not None])
def test_terms_reproduce_rational_s(name):
    ex = oracle.get_example(name)
    for k in (-2.0, 0.3, 1.0, 2.5, 7.0):
        assert np.max(np.abs(mk.s_from_data(ex.data, k) - np.atleast_2d(ex.S_closed(k)))) <= 1e-12


@pytest.mark.parametrize("name", WITH_K_AND_V)
def test_potential_is_diagonal_derivative(name):
    ex = oracle.get_example(name)
    x = np.linspace(0.1, 6.0, 60)
    h = 2e-4

    def Kd(t):
        return np.array([ex.K_closed(s, [s])[0] for s in t])

    dK = (Kd(x - 2 * h) - 8 * Kd(x - h) + 8 * Kd(x + h) - Kd(x + 2 * h)) / (12 * h)
    V = ex.potential(x)
    scale = np.maximum(1.0, np.abs(V).max(axis=(1, 2)))
    assert np.max(np.abs(V + 2 * dK).max(axis=(1, 2)) / scale) <= 1e-8


@pytest.mark.parametrize("name", WITH_K)
def test_closed_kernel_solves_marchenko(name):
    ex = oracle.get_example(name)
    xs = _points(ex)
    for x in xs:
        ys = x + np.array([0.0, 0.4, 1.3, 3.0])

        def integrand(z):
            Kz = ex.K_closed(x, z)
            return np.array([[Kz[i] @ mk.f_eval(ex.data, z[i] + y) for i in range(z.size)] for y in ys]).transpose(1, 0, 2, 3)

        integral = sum(gauss_integral(integrand, x + a, x + a + 2, 40) for a in np.arange(0, 120, 2))
        resid = ex.K_closed(x, ys) + mk.f_eval(ex.data, x + ys) + integral
        assert np.max(np.abs(resid)) <= 1e-9


@pytest.mark.parametrize("name", WITH_JOST)
def test_jost_is_transform_of_kernel(name):
    ex = oracle.get_example(name)
    n = ex.n
    for k in (0.7 + 0.0j, 2.0 + 0.5j):
        for x in _points(ex)[:2]:
            def integrand(y):
                return ex.K_closed(x, y) * np.exp(1j * k * y)[:, None, None]

            ref = np.exp(1j * k * x) * np.eye(n) + sum(
                gauss_integral(integrand, x + a, x + a + 2, 40) for a in np.arange(0, 120, 2))
            assert np.max(np.abs(np.atleast_2d(ex.jost_closed(k, x)) - ref)) <= 1e-9


def test_matexp_m():
    a, c = oracle.MATEXP_A, oracle.MATEXP_C
    m = numlin.sylvester_solve(a, a, c @ c)
    assert m[0, 0] == pytest.approx(11 / 48, abs=1e-12)
    assert m[1, 2] == pytest.approx(5 / 8, abs=1e-12)
    assert np.max(np.abs(m - oracle.MATEXP_M)) <= 1e-12


def test_exp_kernel_scalar_and_vector_agree():
    F = oracle.get_example("two_bs_2x2")
    x = np.array([0.0, 0.7, 2.0])
    vec = F.K_closed(0.7, x[1:])
    for i, y in enumerate(x[1:]):
        assert np.allclose(vec[i], F.K_closed(0.7, np.array([y]))[0])


def test_offdiag_constants():
    k1, k2 = oracle.OFFDIAG_KAPPAS
    J = oracle.get_example("nonunitary_offdiag").extra["J"]
    for kap in (k1, k2):
        assert np.linalg.svd(J(1j * kap), compute_uv=False)[-1] <= 1e-12


def test_truncated_coulomb_fixture():
    V = oracle.catalog_potential("truncated_coulomb")
    assert not V.integrable
