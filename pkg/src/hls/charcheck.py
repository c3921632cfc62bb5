"""
Numerical tests of the characterization conditions for scattering data.

Each check returns a :class:`ConditionResult` carrying a verdict
(``"pass"``, ``"fail"`` or ``"skipped"``) and a small diagnostic map.
:func:`full_report` runs them all and decides whether the data belong to
the Marchenko class, i.e. whether conditions 1, 2, 3a and 4c hold.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from math import factorial
from typing import Optional

import numpy as np

from . import marchenko as mk
from . import numlin
from .errors import HLSError, MarchenkoSingularError, SolverError, ValidationError
from .model import ScatteringData

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
UNITARY_TOL = 1e-6
NULL_TOL = 1e-6
LEVINSON_TOL = 0.05
DELTA_TOL = 1e-5
VB_TOL = 1e-6
PARSEVAL_TOL = 1e-2
K_EPS = 1e-6
LEVINSON_K_MAX = 1e4
CONTINUITY_JUMP = 0.1

MARCHENKO_SET = ("1", "2", "3a", "4c")
QUINTUPLE = ("1", "2", "IIIa", "4c", "Vc")
QUADRUPLE = ("1", "2", "4c", "L")
COVERED = ("3b", "4a", "4b", "4d", "4e", "IIIb", "IIIc", "Va", "Vd", "Ve", "Vf", "Vg", "Vh")


@dataclass
class ConditionResult:
    id: str
    verdict: str
    diagnostic: dict = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self):
        return {"id": self.id, "verdict": self.verdict, "diagnostic": _jsonable(self.diagnostic),
                "message": self.message}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(np.real(v)), "im": float(np.imag(v))}
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def _verdict(ok) -> str:
    return PASS if ok else FAIL


@dataclass
class CheckReport:
    conditions: list
    overall: str
    quintuple: str = ""
    quadruple: str = ""
    warnings: list = field(default_factory=list)
    covered_by_equivalence: tuple = COVERED

    def get(self, cid) -> Optional[ConditionResult]:
        for c in self.conditions:
            if c.id == cid:
                return c
        return None

    def verdicts(self) -> dict:
        return {c.id: c.verdict for c in self.conditions}

    def to_dict(self):
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "overall": self.overall,
            "theorem_quintuple": self.quintuple,
            "theorem_quadruple": self.quadruple,
            "covered_by_equivalence": list(self.covered_by_equivalence),
            "warnings": list(self.warnings),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_text(self) -> str:
        rows = [f"{'condition':<10} {'verdict':<8} diagnostic"]
        for c in self.conditions:
            diag = ", ".join(f"{k}={_fmt(v)}" for k, v in c.diagnostic.items())
            rows.append(f"{c.id:<10} {c.verdict:<8} {diag}")
        rows.append(f"overall: {self.overall}")
        rows.append(f"quintuple {{1,2,IIIa,4c,Vc}}: {self.quintuple}")
        rows.append(f"quadruple {{1,2,4c,L}}: {self.quadruple}")
        rows.append("covered by equivalence: " + ", ".join(self.covered_by_equivalence))
        rows.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(rows)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


# ---------------------------------------------------------------------------
# S-level checks


def _s_samples(data: ScatteringData, k_samples=None):
    if data.variant == "sampled":
        return data.k_grid.points, data.S_values
    ks = np.linspace(0.05, 20.0, 200) if k_samples is None else np.asarray(k_samples, dtype=float)
    return ks, mk.s_from_data(data, ks)


def check_unitarity_symmetry(data: ScatteringData, k_samples=None) -> ConditionResult:
    """``max ||S(-k) - S(k)^dagger||`` and ``max ||S(k)^dagger S(k) - I||`` over samples."""
    ks, S = _s_samples(data, k_samples)
    eye = np.eye(data.n)
    unit = np.linalg.norm(numlin.dagger(S) @ S - eye, ord=2, axis=(1, 2)).max(initial=0.0)
    if data.variant == "sampled":
        # S(-k) is defined through S(k)^dagger, so symmetry is not testable
        sym = 0.0
    else:
        Sm = mk.s_from_data(data, -ks)
        sym = np.linalg.norm(Sm - numlin.dagger(S), ord=2, axis=(1, 2)).max(initial=0.0)
    ok = unit <= UNITARY_TOL and sym <= UNITARY_TOL
    return ConditionResult("1", _verdict(ok), {"unitarity_defect": float(unit), "symmetry_defect": float(sym)})


def check_condition2(data: ScatteringData) -> ConditionResult:
    """``int_0^inf (1+y) ||F_s'(y)|| dy`` from the term lists; finite for positive rates."""
    if data.variant == "sampled":
        y = np.linspace(0.0, 30.0, 3001)
        fs = mk.fs_eval(_with_fs(data), y)
        d = np.linalg.norm(np.gradient(fs, y, axis=0), ord=2, axis=(1, 2))
        val = float(np.trapezoid((1 + y) * d, y))
        return ConditionResult("2", _verdict(np.isfinite(val)), {"moment": val},
                               "regular part only on sampled data")
    terms = tuple(data.fs.right_terms) + tuple(data.fs.left_terms)
    if any(not t.rate > 0 for t in terms):
        return ConditionResult("2", FAIL, {"moment": float("inf")})
    # closed form for one power-zero term per side, quadrature otherwise
    if len(data.fs.right_terms) <= 1 and len(data.fs.left_terms) <= 1 and all(t.power == 0 for t in terms):
        val = sum(np.linalg.norm(t.C, 2) * (1 + 1 / t.rate) for t in terms)
    else:
        val = _quad_condition2(data)
    return ConditionResult("2", _verdict(np.isfinite(val)), {"moment": float(val)})


def _quad_condition2(data):
    from scipy.integrate import quad

    total = 0.0
    for terms in (data.fs.right_terms, data.fs.left_terms):
        if not terms:
            continue
        a = min(t.rate for t in terms)

        def f(y, terms=terms):
            return (1 + y) * np.linalg.norm(mk._eval_terms_deriv(terms, [y], data.n)[0], 2)

        total += quad(f, 0, np.inf, limit=200, epsabs=1e-12, epsrel=1e-10)[0] if a > 0 else np.inf
    return total


def _with_fs(data):
    if data.variant == "sampled" and "_fs_sampled" not in data.__dict__:
        mk.fs_from_sampled(data)
    return data


# ---------------------------------------------------------------------------
# nullities


def _basis_nullity(terms, n, sign, tol):
    if not terms:
        return 0, 1.0
    basis = mk.SeparableBasis.from_terms(terms, n)
    M = np.eye(basis.size * n) + sign * basis.gram([0.0])[0]
    s = np.linalg.svd(M, compute_uv=False)
    # the identity part sets the scale when I + G collapses entirely
    rel = s / max(s[0], 1.0)
    return int(np.sum(rel <= tol)), float(rel[-1])


def _duplicate_rate_warning(terms):
    rates = sorted({t.rate for t in terms})
    for a, b in zip(rates, rates[1:]):
        if abs(a - b) <= 1e-10 * max(1.0, a):
            warnings.warn(f"rates {a} and {b} merged in the exponential basis")


def operator_nullity_right(data: ScatteringData, kernel="F", tol=NULL_TOL) -> int:
    """
    Nullity of ``X + int_0^inf X(z) kernel(z+y) dz = 0`` with ``kernel`` ``"F"`` or ``"Fs"``.

    Any solution lies in the span of the basis functions ``y^q e^{-b y}``
    of the kernel, so the nullity equals that of ``I + G(0)`` with the Gram
    matrix of the separable factorization. Sampled data use a Nystrom
    discretization.
    """
    if data.variant == "sampled":
        return nystrom_nullity(data, kernel, tol=tol)
    terms = mk.f_terms(data) if kernel == "F" else tuple(data.fs.right_terms)
    _duplicate_rate_warning(terms)
    return _basis_nullity(terms, data.n, 1.0, tol)[0]


def left_nullity(data: ScatteringData, tol=NULL_TOL) -> int:
    """Nullity of ``-X(y) + int_{-inf}^0 X(z) F_s(z+y) dz = 0`` on ``y < 0``."""
    if data.variant == "sampled":
        return nystrom_nullity(data, "left", tol=tol)
    return _basis_nullity(tuple(data.fs.left_terms), data.n, -1.0, tol)[0]


def nystrom_nullity(data: ScatteringData, kernel="F", nodes=240, tol=NULL_TOL) -> int:
    """
    Nullity of the same operators on ``L^2`` by Gauss-Legendre Nystrom.

    The half line is truncated where the slowest exponential has decayed
    by ``e^{-40}``. Used as an independent cross-check of the finite-rank
    nullity.
    """
    n = data.n
    if data.variant == "analytic":
        if kernel == "F":
            terms = mk.f_terms(data)
        elif kernel == "Fs":
            terms = tuple(data.fs.right_terms)
        else:
            terms = tuple(data.fs.left_terms)
        if not terms:
            return 0
        a = min(t.rate for t in terms)
        L = 40.0 / a

        def ker(t):
            return mk._eval_terms(terms, t, n)
    else:
        _with_fs(data)
        L = 30.0
        if kernel == "F":
            def ker(t):
                return mk.f_eval(data, t)
        elif kernel == "Fs":
            def ker(t):
                return mk.fs_eval(data, t)
        else:
            def ker(t):
                return mk.fs_eval(data, -t)
    sign = -1.0 if kernel == "left" else 1.0
    t, w = np.polynomial.legendre.leggauss(nodes)
    y = 0.5 * L * (t + 1)
    w = 0.5 * L * w
    sw = np.sqrt(w)
    Fm = ker((y[:, None] + y[None, :]).ravel()).reshape(nodes, nodes, n, n)
    G = (sw[:, None, None, None] * Fm * sw[None, :, None, None]).transpose(0, 2, 1, 3).reshape(nodes * n, nodes * n)
    M = np.eye(nodes * n) + sign * G
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s / max(s[0], 1.0) <= tol))


def check_4c(data: ScatteringData, tol=NULL_TOL) -> ConditionResult:
    nul = operator_nullity_right(data, "F", tol)
    return ConditionResult("4c", _verdict(nul == 0), {"nullity": nul, "expected": 0})


def check_Vc(data: ScatteringData, tol=NULL_TOL) -> ConditionResult:
    nul = operator_nullity_right(data, "Fs", tol)
    N = data.bound_states.total_count
    return ConditionResult("Vc", _verdict(nul == N), {"nullity": nul, "expected": N})


def check_IIIa(data: ScatteringData, tol=NULL_TOL) -> ConditionResult:
    nul = left_nullity(data, tol)
    return ConditionResult("IIIa", _verdict(nul == 0), {"nullity": nul, "expected": 0})


def check_continuity(data: ScatteringData) -> ConditionResult:
    if data.variant == "analytic":
        return ConditionResult("VI", PASS, {"max_jump": 0.0}, "continuous by construction")
    jumps = np.abs(np.diff(data.S_values, axis=0)).max(initial=0.0)
    return ConditionResult("VI", _verdict(jumps < CONTINUITY_JUMP), {"max_jump": float(jumps)})


# ---------------------------------------------------------------------------
# Levinson


def _count_near(vals, target):
    return int(np.sum(np.abs(vals - target) <= 0.1))


def levinson_prediction(data: ScatteringData, k_eps=K_EPS, k_max=None, points=4000):
    """
    Predicted bound-state count ``(LHS/pi - mu + n - n_D) / 2``.

    ``LHS`` is the continuous change of ``arg det S`` from ``k = +inf``
    (the value ``S_inf``) down to ``k_eps``. Returns a diagnostic dict.
    """
    n = data.n
    if data.variant == "sampled":
        ks = data.k_grid.points[::-1]
        S = data.S_values[::-1]
        S0 = data.S_values[0]
    else:
        k_max = LEVINSON_K_MAX if k_max is None else k_max
        ks = np.geomspace(k_max, k_eps, points)
        S = mk.s_from_data(data, ks)
        S0 = S[-1]
    path = np.concatenate([data.S_inf[None], S])
    lhs = numlin.arg_det_unwrap(path)
    ev0 = np.linalg.eigvals(S0)
    mu = _count_near(ev0, 1.0)
    nD = _count_near(np.linalg.eigvals(data.S_inf), -1.0)
    stray = int(np.sum((np.abs(ev0 - 1) > 0.1) & (np.abs(ev0 + 1) > 0.1)))
    pred = (lhs / np.pi - mu + n - nD) / 2
    return {"lhs_over_pi": lhs / np.pi, "mu": mu, "n_D": nD, "predicted_N": pred, "stray_eigenvalues": stray}


def check_levinson(data: ScatteringData, **kw) -> ConditionResult:
    try:
        d = levinson_prediction(data, **kw)
    except SolverError as exc:
        return ConditionResult("L", SKIPPED, {}, str(exc))
    pred = d["predicted_N"]
    near = round(pred)
    N = data.bound_states.total_count
    ok = abs(pred - near) <= LEVINSON_TOL and near >= 0 and near == N
    d["data_N"] = N
    msg = ""
    if d["stray_eigenvalues"]:
        msg = "S(0) has eigenvalues away from +1 and -1; the data are probably invalid"
    return ConditionResult("L", _verdict(ok), d, msg)


# ---------------------------------------------------------------------------
# conditions that need the inverse pipeline


def _s_at(data, ks):
    if data.variant == "analytic":
        return mk.s_from_data(data, ks)
    grid = data.k_grid.points
    out = np.empty((ks.size, data.n, data.n), dtype=complex)
    for i in range(data.n):
        for j in range(data.n):
            v = data.S_values[:, i, j]
            out[:, i, j] = np.interp(ks, grid, v.real) + 1j * np.interp(ks, grid, v.imag)
    return out


def _inverse_ready(inverse):
    return inverse is not None and inverse.K0 is not None and inverse.boundary is not None


def check_3a(data: ScatteringData, inverse, k_samples=None) -> ConditionResult:
    """``Delta(k) = -B^dagger Psi(k,0) + A^dagger Psi'(k,0)`` must vanish."""
    if not _inverse_ready(inverse):
        return ConditionResult("3a", SKIPPED, {}, "boundary recovery failed")
    ks = np.linspace(0.1, 15.0, 30) if k_samples is None else np.asarray(k_samples, dtype=float)
    if data.variant == "sampled":
        ks = ks[(ks >= data.k_grid.start) & (ks <= data.k_grid.stop)]
    fp, fpp, _ = mk.jost_from_kernel(inverse.K0, ks)
    fm, fmp, _ = mk.jost_from_kernel(inverse.K0, -ks)
    S = _s_at(data, ks)
    Psi = fm + fp @ S
    dPsi = fmp + fpp @ S
    pair = inverse.boundary
    D = -numlin.dagger(pair.B)[None] @ Psi + numlin.dagger(pair.A)[None] @ dPsi
    val = float(np.max(np.linalg.norm(D, ord=2, axis=(1, 2)) / (1 + np.abs(ks)), initial=0.0))
    return ConditionResult("3a", _verdict(val <= DELTA_TOL), {"max_delta": val})


def check_Vb(data: ScatteringData, inverse) -> ConditionResult:
    """``J(i kappa_j)^dagger M_j = 0`` with ``J`` built from ``K(0, .)``."""
    if not len(data.bound_states):
        return ConditionResult("Vb", PASS, {"max_ratio": 0.0}, "no bound states")
    if not _inverse_ready(inverse):
        return ConditionResult("Vb", SKIPPED, {}, "boundary recovery failed")
    pair = inverse.boundary.normalized()
    worst = 0.0
    for s in data.bound_states:
        _, _, J = mk.jost_from_kernel(inverse.K0, 1j * s.kappa, pair)
        scale = np.linalg.norm(pair.B, 2) + s.kappa * np.linalg.norm(pair.A, 2)
        r = np.linalg.norm(numlin.dagger(J) @ s.M, 2) / (scale * np.linalg.norm(s.M, 2))
        worst = max(worst, float(r))
    return ConditionResult("Vb", _verdict(worst <= VB_TOL), {"max_ratio": worst})


# ---------------------------------------------------------------------------
# Parseval


def bump(a, b, direction=None, n=1):
    """Smooth bump supported on ``[a, b]`` along ``direction``; returns ``Y(x)`` of shape ``(len, n)``."""
    d = np.ones(n) / np.sqrt(n) if direction is None else np.asarray(direction, dtype=complex)

    def Y(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = (2 * x - a - b) / (b - a)
        inside = np.abs(t) < 1
        v = np.zeros(x.size)
        v[inside] = np.exp(-1 / (1 - t[inside] ** 2))
        return v[:, None] * d[None, :]

    Y.support = (a, b)
    return Y


def default_test_vectors(n):
    rng = np.random.default_rng(7)
    out = []
    for a, b in ((1.0, 2.0), (0.5, 3.0), (2.0, 4.0)):
        d = rng.normal(size=n) + 1j * rng.normal(size=n)
        out.append(bump(a, b, d / np.linalg.norm(d), n))
    return out


def _jost_on_grid(data, ks, xs):
    """``f(k, x)`` for complex ``ks`` and ``xs`` from the separable kernel; shape ``(K, X, n, n)``."""
    n = data.n
    basis = mk._basis_for(data)
    E = np.exp(1j * np.outer(ks, xs))[:, :, None, None] * np.eye(n)
    if basis.size == 0:
        return E
    Phi, _, _, _ = mk.separable_batch(basis, xs)
    out = E.copy()
    for r in range(basis.size):
        q, b = int(basis.powers[r]), basis.rates[r]
        c = (b - 1j * np.asarray(ks, dtype=complex))[:, None]
        # int_x^inf y^q e^{-c y} dy, vectorized over k and x
        acc = np.zeros((c.shape[0], xs.size), dtype=complex)
        xp = np.ones(xs.size)
        for j in range(q + 1):
            acc += (factorial(q) / factorial(j)) * xp[None] / c ** (q - j + 1)
            xp = xp * xs
        w = np.exp(-c * xs[None]) * acc
        out += w[:, :, None, None] * Phi[None, :, r]
    return out


def parseval_defect(data: ScatteringData, Y, k_max=80.0, dk=0.02, dx=0.01):
    """
    Relative defect of ``||F_c Y||^2 + sum_j |F_j Y|^2 = ||Y||^2``.

    Returns ``(defect, continuous part, bound-state part, ||Y||^2)``.
    """
    a, b = Y.support
    xs = np.arange(a, b + dx / 2, dx)
    Yx = Y(xs)
    norm2 = float(np.trapezoid(np.sum(np.abs(Yx) ** 2, axis=1), xs))
    if norm2 == 0:
        return 0.0, 0.0, 0.0, 0.0
    ks = np.arange(dk / 2, k_max, dk)
    S = mk.s_from_data(data, ks)
    cont = 0.0
    chunk = 200
    for lo in range(0, ks.size, chunk):
        kk = ks[lo: lo + chunk]
        fp = _jost_on_grid(data, kk, xs)
        fm = _jost_on_grid(data, -kk, xs)
        Psi = fm + fp @ S[lo: lo + chunk, None]
        integrand = np.einsum("kxji,xj->kxi", np.conj(Psi), Yx)
        Z = np.trapezoid(integrand, xs, axis=1) / np.sqrt(2 * np.pi)
        cont += float(np.sum(np.abs(Z) ** 2) * dk)
    bs = 0.0
    for s in data.bound_states:
        f = _jost_on_grid(data, np.array([1j * s.kappa]), xs)[0]
        Psi_j = f @ s.M
        Zj = np.trapezoid(np.einsum("xji,xj->xi", np.conj(Psi_j), Yx), xs, axis=0)
        bs += float(np.sum(np.abs(Zj) ** 2))
    return abs(cont + bs - norm2) / norm2, cont, bs, norm2


def check_parseval(data: ScatteringData, inverse=None, test_vectors=None, k_max=80.0) -> ConditionResult:
    if data.variant != "analytic":
        return ConditionResult("parseval", SKIPPED, {}, "needs analytic data")
    if inverse is not None and inverse.K0 is None:
        return ConditionResult("parseval", SKIPPED, {}, "Marchenko solve failed")
    vecs = default_test_vectors(data.n) if test_vectors is None else test_vectors
    try:
        res = [parseval_defect(data, Y, k_max=k_max) for Y in vecs]
    except MarchenkoSingularError as exc:
        return ConditionResult("parseval", SKIPPED, {}, str(exc))
    worst = max(r[0] for r in res)
    return ConditionResult("parseval", _verdict(worst <= PARSEVAL_TOL),
                           {"max_defect": worst, "bound_state_parts": [r[2] for r in res]})


# ---------------------------------------------------------------------------
# report


def _combine(results, ids):
    return PASS if all(results[i].passed for i in ids if i in results) and all(i in results for i in ids) else FAIL


def full_report(data: ScatteringData, conditions=None, parseval=True) -> CheckReport:
    """Run every check; stages that depend on a failed inverse are skipped."""
    warns = []
    res = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res["1"] = check_unitarity_symmetry(data)
        res["2"] = check_condition2(data)
        res["IIIa"] = check_IIIa(data)
        res["4c"] = check_4c(data)
        res["Vc"] = check_Vc(data)
        res["VI"] = check_continuity(data)
        res["L"] = check_levinson(data)
        inverse = None
        try:
            inverse = mk.invert(data)
            for stage, msg in inverse.errors:
                warns.append(f"inverse {stage}: {msg}")
        except HLSError as exc:
            warns.append(f"inverse failed: {exc}")
        res["3a"] = check_3a(data, inverse)
        res["Vb"] = check_Vb(data, inverse)
        if parseval:
            res["parseval"] = check_parseval(data, inverse)
    warns.extend(str(w.message) for w in caught)
    warns.extend(r.message for r in res.values() if r.message and r.verdict == FAIL)
    order = ("1", "2", "3a", "4c", "Vb", "Vc", "IIIa", "VI", "L", "parseval")
    if conditions:
        unknown = set(conditions) - set(order)
        if unknown:
            raise ValidationError(f"unknown condition ids {sorted(unknown)}")
    conds = [res[c] for c in order if c in res]
    overall = "marchenko-class" if _combine(res, MARCHENKO_SET) == PASS else "not-marchenko-class"
    return CheckReport(conds, overall, _combine(res, QUINTUPLE), _combine(res, QUADRUPLE), warns)
