import json

import numpy as np
import pytest

from hls import charcheck as cc, marchenko as mk, oracle
from hls.model import BoundState, Grid, ScatteringData, as_terms

CHECKS = {
    "1": cc.check_unitarity_symmetry, "2": cc.check_condition2, "IIIa": cc.check_IIIa,
    "4c": cc.check_4c, "Vc": cc.check_Vc, "L": cc.check_levinson,
}
WITH_INVERSE = {"3a": cc.check_3a, "Vb": cc.check_Vb}
NAMES = [r[0] for r in oracle.list_examples() if oracle.get_example(r[0]).expected]


def ex(name):
    return oracle.get_example(name)


@pytest.fixture(scope="module")
def inverses():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = mk.invert(ex(name).data)
        return cache[name]

    return get


@pytest.mark.parametrize("name", NAMES)
def test_catalog_verdicts(name, inverses):
    e = ex(name)
    got = {}
    for cid in e.expected:
        if cid in CHECKS:
            got[cid] = CHECKS[cid](e.data).verdict
        else:
            got[cid] = WITH_INVERSE[cid](e.data, inverses(name)).verdict
    assert got == e.expected


class TestUnitarity:
    def test_nonunitary_norm(self):
        r = cc.check_unitarity_symmetry(ex("nonunitary_s").data)
        assert r.verdict == cc.FAIL
        S1 = mk.s_from_data(ex("nonunitary_s").data, 1.0)
        assert abs(S1[0, 0]) ** 2 == pytest.approx(0.5)

    def test_asymmetric_is_unitary(self):
        r = cc.check_unitarity_symmetry(ex("asym_s").data)
        assert r.verdict == cc.FAIL
        assert r.diagnostic["unitarity_defect"] <= 1e-12
        assert r.diagnostic["symmetry_defect"] > 1e-6


class TestCondition2:
    def test_sech2_value(self):
        assert cc.check_condition2(ex("sech2_dirichlet").data).diagnostic["moment"] == pytest.approx(4.0, abs=1e-12)

    def test_empty(self):
        r = cc.check_condition2(ScatteringData.analytic(np.eye(1)))
        assert r.verdict == cc.PASS and r.diagnostic["moment"] == 0.0

    def test_one_bs_family(self):
        # F_s' = 4(2 - y) e^{-y}; int (1+y)|F_s'| by quadrature
        from scipy.integrate import quad

        ref = sum(quad(lambda y: (1 + y) * abs(4 * (2 - y) * np.exp(-y)), a, b)[0]
                  for a, b in ((0, 2), (2, 60)))
        assert cc.check_condition2(ex("one_bs_family").data).diagnostic["moment"] == pytest.approx(ref, rel=1e-8)


class TestNullity:
    @pytest.mark.parametrize("name,kernel,want", [
        ("marchenko_singular", "F", 1), ("free_one_bs", "F", 0), ("null2_2x2", "Fs", 2),
        ("rank_choice_2x2", "F", 1), ("two_bs_2x2", "F", 0), ("one_bs_needed", "Fs", 1),
    ])
    def test_finite_rank(self, name, kernel, want):
        assert cc.operator_nullity_right(ex(name).data, kernel) == want

    @pytest.mark.parametrize("name,kernel", [("marchenko_singular", "F"), ("sech2_dirichlet", "F"),
                                             ("null2_2x2", "Fs"), ("rank_choice_2x2", "F")])
    def test_nystrom_agrees(self, name, kernel):
        data = ex(name).data
        assert cc.nystrom_nullity(data, kernel) == cc.operator_nullity_right(data, kernel)

    def test_left_nullity(self):
        assert cc.left_nullity(ex("sech2_dirichlet").data) == 0
        assert cc.left_nullity(ex("levinson_violation").data) == 1
        assert cc.left_nullity(ex("nonunitary_offdiag").data) == 0

    def test_duplicate_rates_warn(self):
        terms = as_terms([([[1.0]], 1.0, 0), ([[1.0]], 1.0 + 1e-12, 0)])
        data = ScatteringData.analytic(np.eye(1), terms)
        with pytest.warns(UserWarning, match="merged"):
            cc.operator_nullity_right(data, "Fs")


class TestLevinson:
    @pytest.mark.parametrize("name,N", [("sech2_dirichlet", 0), ("levinson_violation", -1),
                                        ("rank_choice_2x2", 2), ("two_bs_2x2", 2), ("free_one_bs", 1)])
    def test_prediction(self, name, N):
        d = cc.levinson_prediction(ex(name).data)
        assert abs(d["predicted_N"] - N) <= 0.05

    def test_sech2_parts(self):
        d = cc.levinson_prediction(ex("sech2_dirichlet").data)
        assert d["mu"] == 1 and d["n_D"] == 1 and abs(d["lhs_over_pi"] - 1) <= 0.05

    def test_diagnostic_integers_in_range(self):
        for name in NAMES:
            e = ex(name)
            if "L" not in e.expected:
                continue
            d = cc.levinson_prediction(e.data)
            assert 0 <= d["mu"] <= e.n and 0 <= d["n_D"] <= e.n


class TestInverseChecks:
    def test_free_neumann_delta(self, inverses):
        r = cc.check_3a(ex("free_neumann").data, inverses("free_neumann"))
        assert r.verdict == cc.PASS and r.diagnostic["max_delta"] <= 1e-12

    def test_levinson_violation_delta(self, inverses):
        assert cc.check_3a(ex("levinson_violation").data, inverses("levinson_violation")).verdict == cc.FAIL

    def test_skipped_without_boundary(self, inverses):
        assert cc.check_3a(ex("marchenko_singular").data, inverses("marchenko_singular")).verdict == cc.SKIPPED

    def test_vb_vacuous(self):
        assert cc.check_Vb(ex("sech2_dirichlet").data, None).verdict == cc.PASS

    @pytest.mark.parametrize("name", ["free_one_bs", "scalar_two_pole"])
    def test_vb(self, name, inverses):
        assert cc.check_Vb(ex(name).data, inverses(name)).verdict == cc.PASS

    def test_vb_detects_mismatched_kernel(self, inverses):
        # bound state of one data set against the Jost matrix of another
        data = ex("free_one_bs").data
        bad = data.with_bound_states([BoundState(1.5, [[np.sqrt(2)]])])
        assert cc.check_Vb(bad, inverses("free_one_bs")).verdict == cc.FAIL


class TestParseval:
    def test_free_neumann(self):
        Y = cc.bump(1.0, 2.0)
        defect, cont, bs, norm2 = cc.parseval_defect(ex("free_neumann").data, Y)
        assert defect <= 1e-2 and bs == 0.0

    def test_one_bound_state(self):
        r = cc.check_parseval(ex("free_one_bs").data)
        assert r.verdict == cc.PASS
        assert all(p > 0 for p in r.diagnostic["bound_state_parts"])

    def test_zero_vector(self):
        Y = cc.bump(1.0, 2.0, direction=[0.0])
        assert cc.parseval_defect(ex("free_neumann").data, Y)[0] == 0.0

    def test_sampled_skipped(self):
        data = ScatteringData.sampled(Grid(0.1, 0.1, 5), np.ones(5), [[1.0]])
        assert cc.check_parseval(data).verdict == cc.SKIPPED


class TestContinuity:
    def test_analytic(self):
        assert cc.check_continuity(ex("sech2_dirichlet").data).verdict == cc.PASS

    def test_sampled_jump(self):
        vals = np.ones(10, complex)
        vals[5:] = -1
        data = ScatteringData.sampled(Grid(0.1, 0.1, 10), vals, [[1.0]])
        assert cc.check_continuity(data).verdict == cc.FAIL


class TestReport:
    def test_sech2_all_pass(self):
        rep = cc.full_report(ex("sech2_dirichlet").data, parseval=False)
        assert rep.overall == "marchenko-class"
        assert all(v == cc.PASS for v in rep.verdicts().values())
        assert rep.quintuple == cc.PASS and rep.quadruple == cc.PASS

    def test_nonunitary_2x2_only_condition_1(self):
        rep = cc.full_report(ex("nonunitary_2x2").data, parseval=False)
        v = rep.verdicts()
        assert v["1"] == cc.FAIL and all(v[c] == cc.PASS for c in ("2", "IIIa", "4c", "Vc"))
        assert rep.overall == "not-marchenko-class"

    def test_null2_pattern(self):
        v = cc.full_report(ex("null2_2x2").data, parseval=False).verdicts()
        assert [v[c] for c in ("1", "2", "IIIa")] == [cc.PASS] * 3
        assert [v[c] for c in ("4c", "Vc", "L")] == [cc.FAIL] * 3

    def test_serialization_and_determinism(self):
        data = ex("levinson_violation").data
        a = cc.full_report(data, parseval=False)
        b = cc.full_report(data, parseval=False)
        assert a.to_json(sort_keys=True) == b.to_json(sort_keys=True)
        doc = json.loads(a.to_json())
        assert {"conditions", "overall"} <= set(doc)
        entry = next(c for c in doc["conditions"] if c["id"] == "L")
        assert round(entry["diagnostic"]["predicted_N"]) == -1
        assert "overall:" in a.to_text()

    def test_unknown_condition(self):
        with pytest.raises(Exception):
            cc.full_report(ex("sech2_dirichlet").data, conditions=["zz"], parseval=False)
