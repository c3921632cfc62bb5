"""
Inverse problem: from scattering data to a potential and a boundary pair.

For analytic data ``F_s`` is a finite sum of terms ``C y^p exp(-a y)``, so the
Marchenko kernel ``F(z + y)`` is of finite rank in ``(z, y)`` and the
Marchenko equation reduces to a small linear system whose entries are
incomplete gamma integrals with integer shape. Sampled data go through a
trapezoidal Nystrom discretization instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import numlin
from .errors import (
    BoundaryRecoveryError,
    MarchenkoSingularError,
    SolverError,
    ValidationError,
)
from .model import (
    BoundaryPair,
    ExpPolyTerm,
    Grid,
    Potential,
    ScatteringData,
    boundary_violations,
)

SINGULAR_TOL = 1e-10
DEFAULT_X_STEP = 0.02
DEFAULT_X_MAX = 8.0
FD_STEP = 1e-3


# ---------------------------------------------------------------------------
# F_s, F and S from term lists


def _eval_terms(terms, y, n):
    """Sum of ``C y^p exp(-a y)`` at points ``y`` (array); shape ``(len(y), n, n)``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros((y.size, n, n), dtype=complex)
    for t in terms:
        out += (y**t.power * np.exp(-t.rate * y))[:, None, None] * t.C
    return out


def _eval_terms_deriv(terms, y, n):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros((y.size, n, n), dtype=complex)
    for t in terms:
        p, a = t.power, t.rate
        d = -a * y**p * np.exp(-a * y)
        if p > 0:
            d = d + p * y ** (p - 1) * np.exp(-a * y)
        out += d[:, None, None] * t.C
    return out


def _require_analytic(data):
    if data.variant != "analytic":
        raise ValidationError("this operation needs analytic (term list) scattering data")


def fs_eval(data: ScatteringData, y):
    """``F_s(y)``; ``y = 0`` gives the right limit. Scalar in, matrix out."""
    if data.variant == "sampled":
        fs = data.__dict__.get("_fs_sampled")
        if fs is None:
            raise ValidationError("run fs_from_sampled on sampled data before fs_eval")
        return _squeeze(fs(np.atleast_1d(y)), y)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros((y_arr.size, data.n, data.n), dtype=complex)
    pos = y_arr >= 0
    if pos.any():
        out[pos] = _eval_terms(data.fs.right_terms, y_arr[pos], data.n)
    if (~pos).any():
        out[~pos] = _eval_terms(data.fs.left_terms, -y_arr[~pos], data.n)
    return _squeeze(out, y)


def _squeeze(arr, y):
    return arr[0] if np.ndim(y) == 0 else arr


def bound_state_terms(data: ScatteringData) -> tuple:
    """Bound-state part of ``F`` as terms ``M_j^2 exp(-kappa_j y)``."""
    return tuple(ExpPolyTerm(s.M @ s.M, s.kappa, 0) for s in data.bound_states)


def f_terms(data: ScatteringData) -> tuple:
    _require_analytic(data)
    return tuple(data.fs.right_terms) + bound_state_terms(data)


def f_eval(data: ScatteringData, y):
    """``F(y) = F_s(y) + sum_j M_j^2 exp(-kappa_j y)`` for ``y > 0``."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y_arr < 0):
        raise ValidationError("F is only defined for y >= 0")
    if data.variant == "sampled":
        out = fs_eval(data, y_arr) + _eval_terms(bound_state_terms(data), y_arr, data.n)
    else:
        out = _eval_terms(f_terms(data), y_arr, data.n)
    return _squeeze(out, y)


def s_from_data(data: ScatteringData, k):
    """
    ``S(k)`` from the term lists by exact one-sided Fourier transforms.

    ``int_0^inf y^p e^{-a y} e^{-iky} dy = p!/(a+ik)^{p+1}`` and the mirror
    image for the left terms.
    """
    _require_analytic(data)
    k_arr = np.atleast_1d(np.asarray(k, dtype=complex))
    n = data.n
    out = np.broadcast_to(data.S_inf, (k_arr.size, n, n)).astype(complex)
    for t in data.fs.right_terms:
        out = out + (factorial(t.power) / (t.rate + 1j * k_arr) ** (t.power + 1))[:, None, None] * t.C
    for t in data.fs.left_terms:
        out = out + (factorial(t.power) / (t.rate - 1j * k_arr) ** (t.power + 1))[:, None, None] * t.C
    return _squeeze(out, k)


def g1_from_data(data: ScatteringData) -> np.ndarray:
    """Jump ``G1 = F_s(0+) - F_s(0-)``."""
    if data.variant == "sampled":
        return g1_from_sampled(data)
    G = np.zeros((data.n, data.n), dtype=complex)
    for t in data.fs.right_terms:
        if t.power == 0:
            G = G + t.C
    for t in data.fs.left_terms:
        if t.power == 0:
            G = G - t.C
    return G


# ---------------------------------------------------------------------------
# finite-rank Marchenko solver


def incomplete_gamma_int(m: int, c, x):
    """``int_x^inf z^m exp(-c z) dz`` for integer ``m >= 0`` by the finite sum."""
    x = np.asarray(x, dtype=float)
    c = complex(c) if np.iscomplexobj(c) else float(c)
    total = np.zeros(np.shape(x), dtype=complex if isinstance(c, complex) else float)
    xp = np.ones(np.shape(x))
    for j in range(m + 1):
        total = total + (factorial(m) / factorial(j)) * xp / c ** (m - j + 1)
        xp = xp * x
    return np.exp(-c * x) * total


@dataclass(frozen=True, eq=False)
class SeparableBasis:
    """
    Finite-rank factorization ``F(z + y) = sum_r g_r(z) h_r(y)``.

    ``h_r(y) = y^{q_r} exp(-b_r y)`` and
    ``g_r(z) = exp(-b_r z) sum_m gpoly[r, m] z^m``.
    """

    rates: np.ndarray
    powers: np.ndarray
    gpoly: np.ndarray
    n: int

    @classmethod
    def from_terms(cls, terms, n, merge_tol=1e-10):
        rates = []
        maxpow = {}
        for t in terms:
            key = None
            for r in rates:
                if abs(r - t.rate) <= merge_tol * max(1.0, r):
                    key = r
                    break
            if key is None:
                rates.append(t.rate)
                key = t.rate
            maxpow[key] = max(maxpow.get(key, 0), t.power)
        basis = [(b, q) for b in rates for q in range(maxpow[b] + 1)]
        P = max((t.power for t in terms), default=0)
        R = len(basis)
        gpoly = np.zeros((R, P + 1, n, n), dtype=complex)
        for r, (b, q) in enumerate(basis):
            for t in terms:
                if abs(t.rate - b) <= merge_tol * max(1.0, b) and t.power >= q:
                    gpoly[r, t.power - q] += comb(t.power, q) * t.C
        return cls(np.array([b for b, _ in basis], dtype=float),
                   np.array([q for _, q in basis], dtype=int), gpoly, n)

    @property
    def size(self):
        return self.rates.size

    def h(self, y):
        """Basis functions at ``y``; shape ``(len(y), R)``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))[:, None]
        return y ** self.powers[None] * np.exp(-self.rates[None] * y)

    def h_deriv(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))[:, None]
        q, b = self.powers[None], self.rates[None]
        e = np.exp(-b * y)
        lower = np.where(q > 0, q * y ** np.maximum(q - 1, 0), 0.0)
        return (lower - b * y**q) * e

    def g(self, x, deriv=False):
        """``g_r(x)`` (or ``g_r'(x)``); shape ``(len(x), R, n, n)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P = self.gpoly.shape[1] - 1
        m = np.arange(P + 1)
        xp = x[:, None] ** m[None]
        e = np.exp(-np.outer(x, self.rates))
        poly = np.einsum("xm,rmij->xrij", xp, self.gpoly)
        if not deriv:
            return e[:, :, None, None] * poly
        dxp = np.where(m[None] > 0, m[None] * x[:, None] ** np.maximum(m - 1, 0)[None], 0.0)
        dpoly = np.einsum("xm,rmij->xrij", dxp, self.gpoly)
        return e[:, :, None, None] * (dpoly - self.rates[None, :, None, None] * poly)

    def gram(self, x):
        """Block matrix ``G_sr(x) = int_x^inf h_s g_r``; shape ``(len(x), R n, R n)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        R, n = self.size, self.n
        P = self.gpoly.shape[1] - 1
        G = np.zeros((x.size, R, R, n, n), dtype=complex)
        cache = {}
        for s in range(R):
            for r in range(R):
                c = self.rates[s] + self.rates[r]
                for m in range(P + 1):
                    coef = self.gpoly[r, m]
                    if not np.any(coef):
                        continue
                    key = (int(self.powers[s] + m), c)
                    if key not in cache:
                        cache[key] = incomplete_gamma_int(key[0], c, x)
                    G[:, s, r] += cache[key][:, None, None] * coef
        return G.transpose(0, 1, 3, 2, 4).reshape(x.size, R * n, R * n)


@dataclass
class MarchenkoSolution:
    """
    Solution ``K(x, .)`` of the Marchenko equation at one ``x``.

    ``variant`` is ``"separable"`` (``basis`` and ``coeffs`` with
    ``K(x,y) = sum_r coeffs[r] h_r(y)``) or ``"sampled"`` (``y`` and ``values``).
    ``kx_coeffs`` / ``kx_values`` hold ``K_x(x, .)`` once computed.
    """

    x: float
    variant: str
    K_diag: np.ndarray
    basis: Optional[SeparableBasis] = None
    coeffs: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    kx_coeffs: Optional[np.ndarray] = None
    kx_values: Optional[np.ndarray] = None
    smallest_singular_value: float = float("nan")

    def K(self, y):
        """``K(x, y)`` at points ``y >= x``; shape ``(len(y), n, n)``."""
        return self._eval(self.coeffs, self.values, y)

    def Kx(self, y):
        if self.kx_coeffs is None and self.kx_values is None:
            raise SolverError("K_x has not been computed; call solve_derivative_marchenko")
        return self._eval(self.kx_coeffs, self.kx_values, y)

    def _eval(self, coeffs, values, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.variant == "separable":
            return np.einsum("yr,rij->yij", self.basis.h(y), coeffs)
        n = values.shape[-1]
        out = np.empty((y.size, n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[:, i, j] = (np.interp(y, self.y, values[:, i, j].real)
                                + 1j * np.interp(y, self.y, values[:, i, j].imag))
        return out


def _solve_blocks(M, rhs, xs, R, n):
    """Solve ``Phi M = rhs`` for row blocks; ``rhs`` shape ``(X, R, n, n)``."""
    s = np.linalg.svd(M, compute_uv=False)
    smin = s[:, -1] / np.maximum(s[:, 0], 1e-300)
    bad = smin <= SINGULAR_TOL
    if bad.any():
        i = int(np.argmax(bad))
        raise MarchenkoSingularError(
            f"Marchenko operator singular at x={xs[i]:.6g} "
            f"(relative smallest singular value {smin[i]:.3e})",
            x=float(xs[i]), smallest_singular_value=float(smin[i]),
        )
    # row block vector [Phi_1 ... Phi_R] of shape (n, R n)
    g = rhs.transpose(0, 2, 1, 3).reshape(len(xs), n, R * n)
    Phi = np.swapaxes(np.linalg.solve(np.swapaxes(M, -1, -2), np.swapaxes(g, -1, -2)), -1, -2)
    return Phi.reshape(len(xs), n, R, n).transpose(0, 2, 1, 3), smin


def separable_batch(basis: SeparableBasis, xs, derivative=False):
    """
    Coefficients of ``K(x, .)`` (and optionally ``K_x(x, .)``) at many ``x``.

    Returns ``(Phi, Kdiag, Psi, smin)``; ``Psi`` is None unless ``derivative``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    R, n = basis.size, basis.n
    if R == 0:
        z = np.zeros((xs.size, 0, n, n), dtype=complex)
        zd = np.zeros((xs.size, n, n), dtype=complex)
        return z, zd, (z if derivative else None), np.ones(xs.size)
    M = np.eye(R * n)[None] + basis.gram(xs)
    g = basis.g(xs)
    Phi, smin = _solve_blocks(M, -g, xs, R, n)
    hx = basis.h(xs)
    Kdiag = np.einsum("xr,xrij->xij", hx, Phi)
    Psi = None
    if derivative:
        gp = basis.g(xs, deriv=True)
        rhs = -(gp - np.einsum("xij,xrjk->xrik", Kdiag, g))
        Psi, _ = _solve_blocks(M, rhs, xs, R, n)
    return Phi, Kdiag, Psi, smin


def _basis_for(data: ScatteringData, kernel="F"):
    _require_analytic(data)
    terms = f_terms(data) if kernel == "F" else tuple(data.fs.right_terms)
    for t in terms:
        if not t.rate > 0:
            raise ValidationError("all kernel terms need a positive rate")
    return SeparableBasis.from_terms(terms, data.n)


def solve_marchenko_separable(data: ScatteringData, x: float) -> MarchenkoSolution:
    """Exact finite-rank solution of the Marchenko equation at ``x``."""
    basis = _basis_for(data)
    Phi, Kd, _, smin = separable_batch(basis, [x])
    return MarchenkoSolution(float(x), "separable", Kd[0], basis=basis, coeffs=Phi[0],
                             smallest_singular_value=float(smin[0]))


def solve_derivative_marchenko(data: ScatteringData, x: float, K: MarchenkoSolution = None):
    """
    Solve the derivative Marchenko equation for ``K_x(x, .)``.

    Its source term is ``F'(x+y) - K(x,x) F(x+y)``. The result is stored on
    (and returned as) the :class:`MarchenkoSolution`.
    """
    if K is None:
        K = solve_marchenko_separable(data, x) if data.variant == "analytic" else None
    if K is None:
        raise ValidationError("sampled data needs K from solve_marchenko_nystrom")
    if K.variant == "separable":
        _, _, Psi, _ = separable_batch(K.basis, [K.x], derivative=True)
        K.kx_coeffs = Psi[0]
        return K
    Fc = lambda z: f_eval(data, z)  # noqa: E731
    dF = lambda z: _f_deriv_sampled(data, z)  # noqa: E731
    y = K.y
    h = y[1] - y[0]
    src = dF(K.x + y) - np.einsum("ij,yjk->yik", K.K_diag, Fc(K.x + y))
    K.kx_values = _nystrom_core(Fc, K.x, h, y.size, source=src, richardson=False)[1]
    return K


def kernel_terms_derivative(data: ScatteringData):
    return lambda z: _eval_terms_deriv(f_terms(data), z, data.n)


def _f_deriv_sampled(data, z, h=1e-4):
    return (f_eval(data, z + h) - f_eval(data, np.maximum(z - h, 0))) / (
        (z + h) - np.maximum(z - h, 0))[:, None, None]


# ---------------------------------------------------------------------------
# Nystrom solver


def _nystrom_core(F, x, h, N, source=None, richardson=True):
    """Trapezoidal Nystrom solve on ``y_i = x + i h``; returns ``(y, K)``."""
    y = x + h * np.arange(N)
    F0 = F(x + y) if source is None else source
    n = F0.shape[-1]
    w = np.full(N, h)
    w[0] = w[-1] = h / 2
    zy = y[:, None] + y[None, :]
    Fm = F(zy.reshape(-1)).reshape(N, N, n, n)  # Fm[j, i] = F(z_j + y_i)
    # transposed system: K_i^T + sum_j w_j F(z_j+y_i)^T K_j^T = -F0_i^T
    L = (w[None, :, None, None] * np.swapaxes(Fm, -1, -2).transpose(1, 0, 2, 3))
    L = L.transpose(0, 2, 1, 3).reshape(N * n, N * n) + np.eye(N * n)
    # LU with a reciprocal condition estimate; an SVD costs ten times more
    anorm = np.linalg.norm(L, 1)
    lu, piv, info = scipy.linalg.lapack.zgetrf(L.astype(complex))
    rcond = 0.0
    if info == 0:
        rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm)
    if rcond <= SINGULAR_TOL:
        raise MarchenkoSingularError(
            f"discretized Marchenko operator singular at x={x:.6g}",
            x=float(x), smallest_singular_value=float(rcond),
        )
    rhs = -np.swapaxes(F0, -1, -2).reshape(N * n, n)
    sol, _ = scipy.linalg.lapack.zgetrs(lu, piv, rhs.astype(complex))
    K = np.swapaxes(sol.reshape(N, n, n), -1, -2)
    return y, K


def solve_marchenko_nystrom(F: Callable, x: float, y_grid: Grid, richardson=True) -> MarchenkoSolution:
    """
    Trapezoidal Nystrom solution of the Marchenko equation.

    ``F`` maps an array of arguments to ``(len, n, n)`` values. The grid is
    shifted to start at ``x``; its step and count set the resolution and the
    truncation length. With ``richardson`` the solve is repeated at twice
    the step and the two are combined to cancel the ``h^2`` error term.
    """
    h, N = y_grid.step, y_grid.count
    y, K = _nystrom_core(F, x, h, N)
    if richardson and N >= 5:
        N2 = (N - 1) // 2 + 1
        y2, K2 = _nystrom_core(F, x, 2 * h, N2)
        Kc = K[: 2 * (N2 - 1) + 1: 2]
        K = (4 * Kc - K2) / 3
        y = y2
    return MarchenkoSolution(float(x), "sampled", K[0], y=y, values=K)


# ---------------------------------------------------------------------------
# potential, Jost matrix and boundary recovery


def _diag_derivative(basis, xs, step):
    """``d/dx K(x,x)`` by fourth-order finite differences; one-sided near 0."""
    xs = np.asarray(xs, dtype=float)
    central = xs - 2 * step >= 0
    offs_c = np.array([-2, -1, 1, 2]) * step
    w_c = np.array([1, -8, 8, -1]) / (12 * step)
    offs_f = np.arange(5) * step
    w_f = np.array([-25, 48, -36, 16, -3]) / (12 * step)
    pts = np.concatenate([(xs[central, None] + offs_c).ravel(), (xs[~central, None] + offs_f).ravel()])
    _, Kd, _, _ = separable_batch(basis, pts)
    nc = int(central.sum())
    out = np.empty((xs.size, basis.n, basis.n), dtype=complex)
    out[central] = np.einsum("s,xsij->xij", w_c, Kd[: 4 * nc].reshape(nc, 4, basis.n, basis.n))
    out[~central] = np.einsum("s,xsij->xij", w_f, Kd[4 * nc:].reshape(-1, 5, basis.n, basis.n))
    return out


def default_x_grid(data: ScatteringData, step=DEFAULT_X_STEP) -> Grid:
    """``[0, max(8, 9.2/a_min)]``: the potential decays like ``exp(-2 a_min x)``."""
    rates = [t.rate for t in f_terms(data)] if data.variant == "analytic" else []
    x_max = DEFAULT_X_MAX
    if rates:
        x_max = max(x_max, 9.2 / min(rates))
    return Grid.spanning(0.0, x_max, step)


@dataclass
class PotentialRecovery:
    potential: Optional[Potential]
    failed_x: np.ndarray
    hermitian_defect: float


def recover_potential(data: ScatteringData, x_grid: Grid, partial=False):
    """
    ``V(x) = -2 dK(x,x)/dx`` on ``x_grid``.

    Grid points where the Marchenko system is singular are dropped when
    ``partial`` is true (the result then starts at the first good point and
    the dropped points are listed); otherwise the singularity is raised.
    Returns a :class:`PotentialRecovery` when ``partial``, else a Potential.
    """
    basis = _basis_for(data)
    xs = x_grid.points
    step = min(x_grid.step, FD_STEP)
    try:
        dK = _diag_derivative(basis, xs, step)
        failed = np.zeros(xs.size, dtype=bool)
    except MarchenkoSingularError:
        if not partial:
            raise
        dK = np.zeros((xs.size, data.n, data.n), dtype=complex)
        failed = np.zeros(xs.size, dtype=bool)
        for i, x in enumerate(xs):
            try:
                dK[i] = _diag_derivative(basis, [x], step)[0]
            except MarchenkoSingularError:
                failed[i] = True
    V = -2 * dK
    defect = float(np.max(np.abs(V - numlin.dagger(V)), initial=0.0))
    V = numlin.hermitize(V)
    if failed.any():
        first = int(np.argmin(failed)) if not failed.all() else xs.size
        if first >= xs.size or failed[first:].any():
            bad = xs[failed]
            raise MarchenkoSingularError(
                f"Marchenko operator singular at interior points {bad[:5]}",
                x=float(bad[0]), smallest_singular_value=0.0,
            )
        g = Grid(xs[first], x_grid.step, xs.size - first)
        pot = Potential.sampled(g, V[first:], x_cut=g.stop)
        return PotentialRecovery(pot, xs[failed], defect)
    pot = Potential.sampled(x_grid, V, x_cut=x_grid.stop)
    return PotentialRecovery(pot, xs[:0], defect) if partial else pot


def jost_from_kernel(K0: MarchenkoSolution, k, pair: Optional[BoundaryPair] = None):
    """
    ``f(k,0)``, ``f'(k,0)`` and (with a boundary pair) ``J(k)`` from ``K(0, .)``.

    ``f(k,0) = I + int K(0,y) e^{iky} dy`` and
    ``f'(k,0) = ik I - K(0,0) + int K_x(0,y) e^{iky} dy``; ``J`` needs the
    values at ``-k*``.
    """
    k_arr = np.atleast_1d(np.asarray(k, dtype=complex))
    f0, fp0 = _jost_values_from_kernel(K0, k_arr)
    J = None
    if pair is not None:
        g0, gp0 = _jost_values_from_kernel(K0, -np.conj(k_arr))
        J = numlin.dagger(g0) @ pair.B - numlin.dagger(gp0) @ pair.A
    if np.ndim(k) == 0:
        return f0[0], fp0[0], (None if J is None else J[0])
    return f0, fp0, J


def _jost_values_from_kernel(K0, ks):
    n = K0.K_diag.shape[0]
    eye = np.eye(n, dtype=complex)
    if K0.kx_coeffs is None and K0.kx_values is None:
        raise SolverError("jost_from_kernel needs K_x(0, .); call solve_derivative_marchenko")
    if K0.variant == "separable":
        b, q = K0.basis.rates, K0.basis.powers
        if b.size == 0:
            return np.broadcast_to(eye, (ks.size, n, n)).copy(), 1j * ks[:, None, None] * eye
        fact = np.array([factorial(int(p)) for p in q])
        w = fact[None] / (b[None] - 1j * ks[:, None]) ** (q[None] + 1)
        f0 = eye + np.einsum("kr,rij->kij", w, K0.coeffs)
        fp0 = 1j * ks[:, None, None] * eye - K0.K_diag + np.einsum("kr,rij->kij", w, K0.kx_coeffs)
        return f0, fp0
    y = K0.y
    wts = np.full(y.size, y[1] - y[0])
    wts[0] = wts[-1] = wts[0] / 2
    ph = np.exp(1j * np.outer(ks, y)) * wts[None]
    f0 = eye + np.einsum("ky,yij->kij", ph, K0.values)
    fp0 = 1j * ks[:, None, None] * eye - K0.K_diag + np.einsum("ky,yij->kij", ph, K0.kx_values)
    return f0, fp0


def boundary_system(S_inf, G1, K00) -> np.ndarray:
    n = S_inf.shape[0]
    eye = np.eye(n)
    top = np.concatenate([eye - S_inf, np.zeros((n, n))], axis=1)
    bot = np.concatenate([S_inf @ K00 + K00 @ S_inf - G1, eye + S_inf], axis=1)
    return np.concatenate([top, bot])


def recover_boundary(S_inf, G1, K00, tol=1e-8) -> BoundaryPair:
    """
    Boundary pair spanning the kernel of the block system built from
    ``S_inf``, ``G1`` and ``K(0,0)``.

    An orthonormal kernel basis ``[A; B]`` automatically satisfies
    ``A^dagger A + B^dagger B = I``. The nullity must equal ``n``.
    """
    S_inf = numlin.as_matrix(S_inf, "S_inf")
    G1 = numlin.as_matrix(G1, "G1")
    K00 = numlin.as_matrix(K00, "K00")
    n = S_inf.shape[0]
    basis, nullity = numlin.nullspace(boundary_system(S_inf, G1, K00), tol=tol)
    if nullity != n:
        raise BoundaryRecoveryError(
            f"boundary recovery failed: kernel dimension {nullity}, expected {n}", nullity=nullity)
    A, B = basis[:n], basis[n:]
    viol = boundary_violations(A, B)
    if viol["symmetry_defect"] > 1e-8 or viol["min_eigenvalue"] < 1e-10:
        raise BoundaryRecoveryError(
            f"boundary recovery failed: recovered pair is not selfadjoint "
            f"(symmetry defect {viol['symmetry_defect']:.2e}, "
            f"min eigenvalue {viol['min_eigenvalue']:.2e})", nullity=nullity)
    return BoundaryPair(A, B)


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class InverseResult:
    potential: Optional[Potential]
    boundary: Optional[BoundaryPair]
    K00: Optional[np.ndarray]
    G1: Optional[np.ndarray] = None
    K0: Optional[MarchenkoSolution] = None
    diagnostics: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.errors


def invert(data: ScatteringData, x_grid: Optional[Grid] = None) -> InverseResult:
    """
    Run the inverse pipeline: ``G1``, Marchenko at every ``x``, the potential,
    ``K(0, .)`` with its ``x``-derivative, and the boundary pair.

    Stage failures are collected in ``errors`` as ``(stage, message)`` and
    the remaining stages still run where possible.
    """
    if data.variant == "sampled":
        return invert_sampled(data, x_grid)
    x_grid = x_grid or default_x_grid(data)
    res = InverseResult(None, None, None)
    res.G1 = g1_from_data(data)
    rec = recover_potential(data, x_grid, partial=True)
    res.potential = rec.potential
    res.diagnostics["potential_hermitian_defect"] = rec.hermitian_defect
    if rec.failed_x.size:
        res.diagnostics["failed_x"] = rec.failed_x.tolist()
        res.errors.append(("potential", f"Marchenko singular at x={rec.failed_x[0]:.6g}; "
                                        f"potential recovered from x={res.potential.grid.start:.6g}"))
    try:
        K0 = solve_marchenko_separable(data, 0.0)
        solve_derivative_marchenko(data, 0.0, K0)
    except MarchenkoSingularError as exc:
        res.errors.append(("kernel", str(exc)))
        return res
    res.K0 = K0
    res.K00 = K0.K_diag
    res.diagnostics["K00_hermitian_defect"] = numlin.hermitian_defect(K0.K_diag)
    res.diagnostics["marchenko_residual"] = marchenko_residual(data, K0)
    try:
        res.boundary = recover_boundary(data.S_inf, res.G1, K0.K_diag)
    except BoundaryRecoveryError as exc:
        res.errors.append(("boundary", str(exc)))
        res.diagnostics["boundary_nullity"] = exc.nullity
    return res


def marchenko_residual(data: ScatteringData, sol: MarchenkoSolution, probes=20) -> float:
    """Max residual of the Marchenko equation at ``probes`` points, integrals in closed form."""
    x = sol.x
    ys = x + np.linspace(0.0, 10.0, probes)
    Fv = f_eval(data, x + ys)
    if sol.variant != "separable":
        raise ValidationError("closed-form residual needs a separable solution")
    basis = sol.basis
    # int_x^inf K(x,z) F(z+y) dz = sum_s Phi_s sum_r G_sr(x) h_r(y)
    G = basis.gram([x])[0]
    R, n = basis.size, basis.n
    Phi_row = sol.coeffs.transpose(1, 0, 2).reshape(n, R * n)
    PG = (Phi_row @ G).reshape(n, R, n).transpose(1, 0, 2)
    integral = np.einsum("yr,rij->yij", basis.h(ys), PG)
    res = sol.K(ys) + Fv + integral
    return float(np.max(np.abs(res), initial=0.0))


# ---------------------------------------------------------------------------
# sampled data


def _taper(k, k_max, frac=0.1):
    w = np.ones_like(k)
    start = (1 - frac) * k_max
    sel = k > start
    w[sel] = 0.5 * (1 + np.cos(np.pi * (k[sel] - start) / (k_max - start)))
    return w


def g1_from_sampled(data: ScatteringData) -> np.ndarray:
    """``lim ik (S(k) - S_inf)`` extrapolated from the top of the sampled grid."""
    k = data.k_grid.points
    S = data.S_values
    sel = slice(max(0, k.size - 4), k.size)
    g = 1j * k[sel, None, None] * (S[sel] - data.S_inf)
    # fit g(k) = G1 + c/k in least squares over the last samples
    X = np.stack([np.ones(g.shape[0]), 1 / k[sel]], axis=1)
    coef, *_ = np.linalg.lstsq(X, g.reshape(g.shape[0], -1), rcond=None)
    return coef[0].reshape(data.n, data.n)


def fs_from_sampled(data: ScatteringData, y_max=40.0, y_step=0.01):
    """
    Attach ``F_s`` computed by quadrature of ``(S(k) - S_inf) e^{iky}`` over
    ``[-k_max, k_max]`` with a raised-cosine taper on the top 10% of ``k``.

    The slowly decaying part ``G1/(1+ik)``, whose transform is the jump
    term ``G1 e^{-y}`` on ``y > 0``, is removed before the quadrature and
    added back exactly. Returns the data object (the transform is cached on it).
    """
    k = data.k_grid.points
    G1 = g1_from_sampled(data)
    wk = _taper(k, k[-1])
    dk = np.gradient(k)
    rest = data.S_values - data.S_inf - G1 / (1 + 1j * k)[:, None, None]
    D = rest * (wk * dk)[:, None, None]
    y = np.arange(-y_max, y_max + y_step / 2, y_step)
    ph = np.exp(1j * np.outer(y, k))
    # S(-k) = S(k)^dagger supplies the negative half
    Fy = (np.einsum("yk,kij->yij", ph, D) + np.einsum("yk,kij->yij", np.conj(ph), numlin.dagger(D))) / (2 * np.pi)
    n = data.n

    def fs(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty((q.size, n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[:, i, j] = np.interp(q, y, Fy[:, i, j].real, 0, 0) + 1j * np.interp(q, y, Fy[:, i, j].imag, 0, 0)
        jump = np.where(q >= 0, np.exp(-np.maximum(q, 0)), 0.0)
        return out + jump[:, None, None] * G1

    data.__dict__["_fs_sampled"] = fs
    return data


def invert_sampled(data: ScatteringData, x_grid: Optional[Grid] = None, y_step=0.02, y_len=20.0):
    """Inverse pipeline for sampled ``S`` via the Nystrom solver (coarse accuracy)."""
    if "_fs_sampled" not in data.__dict__:
        fs_from_sampled(data)
    x_grid = x_grid or Grid.spanning(0.0, DEFAULT_X_MAX, DEFAULT_X_STEP)
    F = lambda z: f_eval(data, z)  # noqa: E731
    N = int(round(y_len / y_step)) + 1
    res = InverseResult(None, None, None)
    res.G1 = g1_from_sampled(data)
    xs = x_grid.points
    Kd = np.empty((xs.size, data.n, data.n), dtype=complex)
    for i, x in enumerate(xs):
        Kd[i] = solve_marchenko_nystrom(F, x, Grid(x, y_step, N)).K_diag
    V = -2 * np.gradient(Kd, x_grid.step, axis=0)
    res.potential = Potential.sampled(x_grid, numlin.hermitize(V), x_cut=x_grid.stop)
    K0 = solve_marchenko_nystrom(F, 0.0, Grid(0.0, y_step, N), richardson=False)
    solve_derivative_marchenko(data, 0.0, K0)
    res.K0 = K0
    res.K00 = numlin.hermitize(K0.K_diag)
    try:
        res.boundary = recover_boundary(data.S_inf, numlin.hermitize(res.G1), res.K00, tol=1e-3)
    except BoundaryRecoveryError as exc:
        res.errors.append(("boundary", str(exc)))
    return res
