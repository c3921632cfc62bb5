"""
Direct scattering problem for the matrix Schroedinger operator.

Given a hermitian potential ``V`` on the half line and a selfadjoint
boundary pair ``(A, B)`` this module computes the Jost solution, the Jost
matrix ``J(k) = f(-k*,0)^dagger B - f'(-k*,0)^dagger A``, the scattering
matrix ``S(k) = -J(-k) J(k)^{-1}``, the physical and regular solutions, the
bound-state energies ``-kappa_j^2`` and the normalization matrices ``M_j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import numlin
from .errors import GridTooCoarseError, SolverError, ValidationError
from .model import (
    BoundaryPair,
    BoundState,
    BoundStateData,
    Grid,
    Potential,
    validate_boundary_pair,
    validate_potential,
)
from .propagate import march, march_coarse

K_EPS = 1e-6
KAPPA_EPS = 1e-3
DEFAULT_K_MAX = 30.0
DEFAULT_K_POINTS = 301
DEFAULT_KAPPA_MAX = 10.0
SCAN_POINTS = 400
ACCEPT_TOL = 1e-6
MULT_TOL = 1e-5
G1_K = 50.0


@dataclass
class JostValues:
    """Jost solution data at one wavenumber; ``samples`` is ``(x, f, f')`` or None."""

    k: complex
    f0: np.ndarray
    fp0: np.ndarray
    samples: Optional[tuple] = None


@dataclass
class DirectResult:
    k_grid: Grid
    S_values: np.ndarray
    S_inf: np.ndarray
    G1: np.ndarray
    bound_states: BoundStateData
    pair: BoundaryPair
    jost_cache: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def S_on_grid(self):
        return self.k_grid, list(self.S_values)


# ---------------------------------------------------------------------------
# Jost solution


def _free_start(ks, n):
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    eye = np.eye(n, dtype=complex)
    Y = np.empty((ks.size, 2 * n, n), dtype=complex)
    Y[:, :n] = eye
    Y[:, n:] = 1j * ks[:, None, None] * eye
    return Y


def _check_k(ks):
    if np.any(np.imag(ks) < -1e-14):
        raise ValidationError("the Jost solution requires Im k >= 0")


def jost_batch(V: Potential, ks, coarse=False):
    """
    ``f(k,0)`` and ``f'(k,0)`` for an array of ``k`` with ``Im k >= 0``.

    Returns two arrays of shape ``(K, n, n)``. ``coarse`` skips the error
    control and is only meant for locating features in scans.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    _check_k(ks)
    n = V.n
    if V.is_zero:
        eye = np.broadcast_to(np.eye(n, dtype=complex), (ks.size, n, n))
        return eye.copy(), 1j * ks[:, None, None] * eye
    # the marched state equals exp(-ikx) times the solution, i.e. the solution at x=0
    if coarse:
        Y = march_coarse(V, ks, [0.0, V.x_cut], _free_start(ks, n), backward=True)
        return Y[:, :n], Y[:, n:]
    Y, _ = march(V, ks, [0.0, V.x_cut], _free_start(ks, n), backward=True)
    return Y[:, :n], Y[:, n:]


def jost_solve(V: Potential, k, x_grid: Optional[Grid] = None) -> JostValues:
    """Jost solution at ``k``; samples on ``x_grid`` when given."""
    k = complex(k)
    _check_k(np.array([k]))
    n = V.n
    if x_grid is None:
        f0, fp0 = jost_batch(V, [k])
        return JostValues(k, f0[0], fp0[0])
    x, f, fp = _jost_samples(V, np.array([k]), x_grid.points)
    return JostValues(k, f[0, 0], fp[0, 0], (x, f[:, 0], fp[:, 0]))


def _jost_samples(V, ks, x):
    """Jost solution at points ``x`` (ascending, >= 0); arrays shaped (len(x), K, n, n)."""
    n = V.n
    ks = np.asarray(ks, dtype=complex)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValidationError("sample points must be nonnegative")
    inside = x[x < V.x_cut]
    free = x[x >= V.x_cut]
    parts_f, parts_fp = [], []
    if inside.size:
        nodes = np.concatenate([inside, [V.x_cut]])
        if V.is_zero:
            m = np.broadcast_to(_free_start(ks, n), (nodes.size,) + (ks.size, 2 * n, n))
        else:
            m, _ = march(V, ks, nodes, _free_start(ks, n), backward=True, sampled=True)
        ph = np.exp(1j * np.outer(inside, ks))[:, :, None, None]
        parts_f.append(ph * m[:-1, :, :n])
        parts_fp.append(ph * m[:-1, :, n:])
    if free.size:
        ph = np.exp(1j * np.outer(free, ks))[:, :, None, None]
        eye = np.eye(n, dtype=complex)
        parts_f.append(ph * eye)
        parts_fp.append(1j * ks[None, :, None, None] * ph * eye)
    return x, np.concatenate(parts_f), np.concatenate(parts_fp)


def jost_matrix(jv: JostValues, pair: BoundaryPair) -> np.ndarray:
    """
    ``J(k)`` from Jost values taken at ``-k*``.

    ``jv`` must hold ``f(-k*,0)`` and ``f'(-k*,0)``; for ``k = i kappa`` this
    is the Jost solution at ``k`` itself, for real ``k`` it is at ``-k``.
    """
    return _jost_from_values(jv.f0, jv.fp0, pair)


def _jost_from_values(f0, fp0, pair):
    if f0.shape[-1] != pair.n:
        raise ValidationError(f"dimension mismatch: Jost values are {f0.shape[-1]}x{f0.shape[-1]}, "
                              f"boundary pair is {pair.n}x{pair.n}")
    return numlin.dagger(f0) @ pair.B - numlin.dagger(fp0) @ pair.A


def jost_matrix_at(V: Potential, pair: BoundaryPair, ks) -> np.ndarray:
    """``J(k)`` for an array of ``k`` with ``Im k >= 0``; shape ``(K, n, n)``."""
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    f0, fp0 = jost_batch(V, -np.conj(ks))
    return _jost_from_values(f0, fp0, pair)


def _s_from_jost(Jp, Jm):
    """``-J(-k) J(k)^{-1}`` with near-singularity detection."""
    s = np.linalg.svd(Jp, compute_uv=False)
    if np.any(s[..., -1] <= 1e-13 * s[..., 0]):
        raise SolverError("Jost matrix numerically singular at a real k")
    return -np.swapaxes(np.linalg.solve(np.swapaxes(Jp, -1, -2), np.swapaxes(Jm, -1, -2)), -1, -2)


def scattering_batch(V: Potential, pair: BoundaryPair, ks) -> np.ndarray:
    """``S(k)`` for an array of real positive ``k``; shape ``(K, n, n)``."""
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    if np.any(ks < 0):
        raise ValidationError("scattering_batch expects k >= 0; use S(-k) = S(k)^dagger")
    ks = np.where(ks == 0, K_EPS, ks)
    # J(k) needs f(-k,0); J(-k) needs f(k,0)
    f0, fp0 = jost_batch(V, np.concatenate([-ks, ks]))
    K = ks.size
    Jp = _jost_from_values(f0[:K], fp0[:K], pair)
    Jm = _jost_from_values(f0[K:], fp0[K:], pair)
    return _s_from_jost(Jp, Jm)


def scattering_matrix_direct(V: Potential, pair: BoundaryPair, k: float) -> np.ndarray:
    """``S(k)``; negative ``k`` via ``S(-k) = S(k)^dagger``, ``k = 0`` via ``k_eps``."""
    k = float(k)
    if k == 0.0:
        warnings.warn(f"S(0) evaluated at k = {K_EPS:g}", RuntimeWarning, stacklevel=2)
    if k < 0:
        return numlin.dagger(scattering_batch(V, pair, [-k])[0])
    return scattering_batch(V, pair, [k])[0]


def regular_solution(V: Potential, pair: BoundaryPair, k, x_grid: Grid):
    """``phi(k,x)`` and ``phi'(k,x)`` on ``x_grid`` with ``phi(k,0)=A``, ``phi'(k,0)=B``."""
    k = complex(k)
    n = pair.n
    x = x_grid.points
    if np.any(x < 0):
        raise ValidationError("x_grid must lie in [0, inf)")
    nodes = np.unique(np.concatenate([[0.0], x]))
    Y0 = np.concatenate([pair.A, pair.B])[None].astype(complex)
    if V.is_zero:
        Vm = Potential.zero(n, x_cut=max(V.x_cut, nodes[-1]))
    else:
        Vm = V
    if nodes.size == 1:
        st = np.broadcast_to(Y0, (1,) + Y0.shape)
    else:
        st, _ = march(Vm, np.array([k]), nodes, Y0, backward=False, sampled=True)
    # forward state equals exp(ikx) times the solution
    ph = np.exp(-1j * k * nodes)[:, None, None]
    phi = ph * st[:, 0, :n]
    dphi = ph * st[:, 0, n:]
    idx = np.searchsorted(nodes, x)
    return phi[idx], dphi[idx]


def physical_solution(V: Potential, pair: BoundaryPair, k: float, x_grid: Grid):
    """``Psi(k,x) = f(-k,x) + f(k,x) S(k)`` and its derivative on ``x_grid``."""
    k = float(k)
    ks = np.array([-k, k]) if k >= 0 else np.array([k, -k])
    _, f, fp = _jost_samples(V, np.abs(ks) * np.sign(ks), x_grid.points)
    S = scattering_matrix_direct(V, pair, k)
    psi = f[:, 0] + f[:, 1] @ S
    dpsi = fp[:, 0] + fp[:, 1] @ S
    return psi, dpsi


# ---------------------------------------------------------------------------
# bound states


def _j_imag(V, pair, kappas, coarse=False):
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    f0, fp0 = jost_batch(V, 1j * kappas, coarse)
    return _jost_from_values(f0, fp0, pair)


def _smin_ratio(J, kappas, pair):
    """Smallest singular value of ``J(i kappa)`` relative to the free scale ``|B| + kappa |A|``."""
    s = np.linalg.svd(J, compute_uv=False)
    scale = np.linalg.norm(pair.B, 2) + np.asarray(kappas) * np.linalg.norm(pair.A, 2)
    return s[..., -1] / scale


def _adjoint_kernel(J, kappa, pair, tol=MULT_TOL):
    """Orthonormal basis of ``Ker J^dagger`` measured against the free scale."""
    U, s, _ = np.linalg.svd(J)
    scale = np.linalg.norm(pair.B, 2) + kappa * np.linalg.norm(pair.A, 2)
    return U[:, s <= tol * scale]


def _newton_refine(V, pair, kappa, lo, hi, maxit=30):
    """Matrix Newton step: zero of det(J0 + d J1) via a generalized eigenproblem."""
    import scipy.linalg

    for _ in range(maxit):
        d = 1e-5 * max(kappa, 1e-3)
        Js = _j_imag(V, pair, [kappa, kappa - d, kappa + d])
        J0, J1 = Js[0], (Js[2] - Js[1]) / (2 * d)
        w = scipy.linalg.eigvals(J0, -J1)
        w = w[np.isfinite(w)]
        if w.size == 0:
            return None
        step = float(np.real(w[np.argmin(np.abs(w))]))
        new = kappa + step
        if not (lo < new < hi):
            return None
        kappa = new
        if abs(step) <= 1e-12 * max(1.0, kappa):
            break
    return kappa


def _golden_refine(V, pair, lo, hi, tol=1e-10):
    g = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = _smin_ratio(_j_imag(V, pair, [c, d]), [c, d], pair)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = _smin_ratio(_j_imag(V, pair, [c]), [c], pair)[0]
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = _smin_ratio(_j_imag(V, pair, [d]), [d], pair)[0]
    return 0.5 * (a + b)


def find_bound_states(V: Potential, pair: BoundaryPair, kappa_max=DEFAULT_KAPPA_MAX,
                      points=SCAN_POINTS, kappa_eps=KAPPA_EPS) -> BoundStateData:
    """
    Zeros of ``J(i kappa)`` for ``kappa`` in ``[kappa_eps, kappa_max]``.

    The smallest relative singular value of ``J(i kappa)`` is scanned on a
    log grid; each local minimum is refined and accepted when it drops below
    ``1e-6``. ``M`` holds the kernel projector of ``J(i kappa)^dagger`` so its
    rank is the multiplicity; see :func:`bound_normalization` for the true ``M``.
    """
    if kappa_max <= 0:
        raise ValidationError("kappa_max must be positive")
    if V.is_zero and np.all(pair.A == 0):
        return BoundStateData(())
    # J(k) T has the same kernel as J(k); the normalized pair fixes the scale
    pair = pair.normalized()
    grid = np.geomspace(kappa_eps, kappa_max, points)
    r = _smin_ratio(_j_imag(V, pair, grid, coarse=True), grid, pair)
    roots = []
    for i in range(points):
        left = r[i - 1] if i > 0 else np.inf
        right = r[i + 1] if i < points - 1 else np.inf
        if not (r[i] < left and r[i] < right):
            continue
        # the coarse scan can misplace a zero by a few cells where V is large
        lo = grid[max(i - 4, 0)]
        hi = grid[min(i + 4, points - 1)]
        kap = _newton_refine(V, pair, grid[i], lo * (1 - 1e-12), hi * (1 + 1e-12))
        if kap is None:
            kap = _golden_refine(V, pair, lo, hi)
        J = _j_imag(V, pair, [kap])[0]
        if _smin_ratio(J, kap, pair) <= ACCEPT_TOL:
            roots.append((kap, J))
    roots.sort(key=lambda t: t[0])
    merged = []
    for kap, J in roots:
        if merged and kap - merged[-1][0] <= 1e-8 * (1 + kap):
            continue
        merged.append((kap, J))
    roots = merged
    for (a, _), (b, _) in zip(roots, roots[1:]):
        if b - a < 1e-6:
            raise GridTooCoarseError(
                f"bound states at kappa={a:.9g} and {b:.9g} are not separated; refine the scan"
            )
    states = []
    for kap, J in roots:
        basis = _adjoint_kernel(J, kap, pair)
        states.append(BoundState(kappa=float(kap), M=numlin.projector(basis)))
    return BoundStateData(tuple(states))


def _romberg(y, h):
    """Romberg integration of equally spaced samples (count = 4m + 1)."""
    t1 = np.trapezoid(y, dx=h, axis=0)
    t2 = np.trapezoid(y[::2], dx=2 * h, axis=0)
    t4 = np.trapezoid(y[::4], dx=4 * h, axis=0)
    r1 = (4 * t1 - t2) / 3
    r2 = (4 * t2 - t4) / 3
    return (16 * r1 - r2) / 15, np.max(np.abs(r1 - r2), initial=0.0)


def bound_normalization(V: Potential, pair: BoundaryPair, kappa: float, step=0.01):
    """
    Projector ``P`` onto ``Ker J(i kappa)^dagger`` and normalization matrix ``M``.

    ``A = int f^dagger f`` is computed by Romberg integration on ``[0, x_cut]``
    plus the exact free tail ``exp(-2 kappa x_cut) / (2 kappa)``.
    """
    kappa = float(kappa)
    n = pair.n
    pair = pair.normalized()
    J = _j_imag(V, pair, [kappa])[0]
    basis = _adjoint_kernel(J, kappa, pair)
    if basis.shape[1] == 0:
        raise SolverError(f"J(i*{kappa:.9g}) is not singular; not a bound state")
    P = numlin.projector(basis)
    xc = V.x_cut
    m = max(1, int(np.ceil(xc / (4 * step))))
    x = np.linspace(0.0, xc, 4 * m + 1)
    _, f, _ = _jost_samples(V, np.array([1j * kappa]), x)
    f = f[:, 0]
    integrand = numlin.dagger(f) @ f
    Aj, _ = _romberg(integrand, x[1] - x[0])
    Aj = Aj + np.exp(-2 * kappa * xc) / (2 * kappa) * np.eye(n)
    Bj = (np.eye(n) - P) + P @ Aj @ P
    try:
        M = numlin.inv_sqrt_psd(numlin.hermitize(Bj)) @ P
    except ValidationError as exc:
        raise SolverError(f"normalization matrix at kappa={kappa:.9g} is not positive definite") from exc
    return P, numlin.hermitize(M)


# ---------------------------------------------------------------------------
# large-k data


def s_inf_exact(pair: BoundaryPair) -> np.ndarray:
    """Limit of ``S(k)`` as ``k -> inf``: ``2 P_ran(A) - I``."""
    n = pair.n
    basis, r = numlin.nullspace(numlin.dagger(pair.A))
    P_ker_adj = numlin.projector(basis) if r else np.zeros((n, n), complex)
    return np.eye(n) - 2 * P_ker_adj


def s_inf_and_g1_direct(V: Potential, pair: BoundaryPair, K=G1_K):
    """
    ``S_inf`` and ``G1 = lim ik (S(k) - S_inf)``.

    ``G1`` is extrapolated from ``k`` in ``{K, 2K, 4K}`` assuming an
    expansion in powers of ``1/k``. Returns ``(S_inf, G1, residual)``.
    """
    S_inf = s_inf_exact(pair)
    ks = np.array([K, 2 * K, 4 * K])
    S = scattering_batch(V, pair, ks)
    g = 1j * ks[:, None, None] * (S - S_inf)
    G1 = (g[0] - 6 * g[1] + 8 * g[2]) / 3
    G1_two = 2 * g[2] - g[1]
    return S_inf, G1, float(np.max(np.abs(G1 - G1_two)))


def solve_direct(V: Potential, pair: BoundaryPair, k_max=DEFAULT_K_MAX, k_points=DEFAULT_K_POINTS,
                 kappa_max=DEFAULT_KAPPA_MAX, pmap: Optional[Callable] = None) -> DirectResult:
    """
    Full direct problem: ``S`` on ``(0, k_max]``, ``S_inf``, ``G1``, bound states.

    ``pmap`` is an optional parallel map applied to chunks of the k grid.
    """
    V = validate_potential(V)
    pair = validate_boundary_pair(pair.A, pair.B)
    if V.n != pair.n:
        raise ValidationError(f"potential is {V.n}x{V.n} but boundary pair is {pair.n}x{pair.n}")
    if k_max <= 0 or k_points < 2:
        raise ValidationError("k_max must be positive and k_points at least 2")
    # the grid excludes k = 0, where S is only a one-sided limit
    grid = Grid(k_max / k_points, k_max / k_points, k_points)
    ks = grid.points
    chunks = np.array_split(ks, max(1, ks.size // 64))
    mapper = pmap or map
    S = np.concatenate(list(mapper(lambda c: scattering_batch(V, pair, c), chunks)))
    S_inf, G1, resid = s_inf_and_g1_direct(V, pair)
    notes = []
    if resid > 1e-4:
        notes.append(f"G1 extrapolation residual {resid:.2e} exceeds 1e-4")
    found = find_bound_states(V, pair, kappa_max)
    states = []
    for bs in found:
        _, M = bound_normalization(V, pair, bs.kappa)
        states.append(BoundState(bs.kappa, M))
    return DirectResult(grid, S, S_inf, G1, BoundStateData(tuple(states)), pair, warnings=notes)
