"""
Transfer-matrix integration of ``-psi'' + V psi = k^2 psi``.

The potential is frozen at the midpoint of each cell and the constant
coefficient system is propagated exactly through the eigenbasis of that
midpoint value, so the ``k^2`` part carries no discretization error. The
scheme is symmetric, its global error expands in even powers of the cell
width, and three levels of halving are combined by Richardson
extrapolation. If the extrapolation error estimate exceeds the tolerance
the cells are halved again.

Every cell matrix is multiplied by ``exp(i k h)``; for ``Im k > 0`` this
keeps the dominant solution of order one in both marching directions.
The marched state is therefore the solution times ``exp(i k distance)``.
"""

from __future__ import annotations

import threading
from collections import OrderedDict

import numpy as np

from .errors import SolverError

H0 = 0.02
TOL = 1e-9
MAX_REFINE = 2
_CHUNK_ELEMS = 4_000_000


def _edges(nodes, h):
    """Cell edges subdividing every node interval into equal cells of width <= h."""
    nodes = np.asarray(nodes, dtype=float)
    lengths = np.diff(nodes)
    subs = np.maximum(1, np.ceil(lengths / h - 1e-9).astype(int))
    pieces = [np.linspace(a, b, s + 1)[:-1] for a, b, s in zip(nodes[:-1], nodes[1:], subs)]
    edges = np.concatenate(pieces + [nodes[-1:]])
    node_idx = np.concatenate([[0], np.cumsum(subs)])
    return edges, node_idx


_EIG_CACHE: "OrderedDict" = OrderedDict()
_EIG_CACHE_SIZE = 24
_EIG_LOCK = threading.Lock()


def _cell_eig(V, edges):
    """Midpoint eigendata, cached per potential and cell layout."""
    if V.is_zero:
        return _cell_eig_raw(V, edges)
    key = (id(V), edges.size, hash(edges.tobytes()))
    with _EIG_LOCK:
        hit = _EIG_CACHE.get(key)
        if hit is not None and hit[0] is V:
            _EIG_CACHE.move_to_end(key)
            return hit[1]
    val = _cell_eig_raw(V, edges)
    with _EIG_LOCK:
        _EIG_CACHE[key] = (V, val)
        while len(_EIG_CACHE) > _EIG_CACHE_SIZE:
            _EIG_CACHE.popitem(last=False)
    return val


def _cell_eig_raw(V, edges):
    mids = 0.5 * (edges[1:] + edges[:-1])
    if V.is_zero:
        n = V.n
        lam = np.zeros((mids.size, n))
        U = np.broadcast_to(np.eye(n, dtype=complex), (mids.size, n, n))
        return lam, U, True
    vals = V(mids)
    vals = 0.5 * (vals + np.conj(np.swapaxes(vals, -1, -2)))
    if V.n == 1:
        return vals[:, :, 0].real, None, True
    lam, U = np.linalg.eigh(vals)
    return lam, U, False


def _coeffs(lam, ks, h, sign):
    """cosh(s h), sign*sinh(s h)/s, sign*s sinh(s h) with s = sqrt(lam - k^2)."""
    w = lam[:, None, :] - (ks**2)[None, :, None]
    s = np.sqrt(w.astype(complex))
    hh = h[:, None, None]
    z = s * hh
    c = np.cosh(z)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    shs = np.where(small, hh * (1 + z**2 / 6), np.sinh(zs) / np.where(small, 1.0, s))
    ssh = w * shs
    phase = np.exp(1j * ks[None, :] * h[:, None])[:, :, None]
    return c * phase, sign * shs * phase, sign * ssh * phase


def _cell_matrices(lam, U, diag, ks, h, sign):
    """Cell transfer matrices, shape (cells, K, 2n, 2n)."""
    c, a, b = _coeffs(lam, ks, h, sign)
    if diag:
        if U is None or lam.shape[1] == 1:
            n = lam.shape[1]
            T = np.zeros(c.shape[:2] + (2 * n, 2 * n), dtype=complex)
            idx = np.arange(n)
            T[..., idx, idx] = c
            T[..., idx, n + idx] = a
            T[..., n + idx, idx] = b
            T[..., n + idx, n + idx] = c
            return T
    Uh = np.conj(np.swapaxes(U, -1, -2))

    U4, Uh4 = U[:, None], Uh[:, None]

    def rot(d):
        return (U4 * d[..., None, :]) @ Uh4

    C, Aa, Bb = rot(c), rot(a), rot(b)
    top = np.concatenate([C, Aa], axis=-1)
    bot = np.concatenate([Bb, C], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _tree_product(T):
    """Ordered product T[0] @ T[1] @ ... along axis 0."""
    while T.shape[0] > 1:
        if T.shape[0] % 2:
            eye = np.broadcast_to(np.eye(T.shape[-1], dtype=complex), (1,) + T.shape[1:])
            T = np.concatenate([T, eye], axis=0)
        T = T[0::2] @ T[1::2]
    return T[0]


def _endpoint_level(V, ks, nodes, Y0, backward, h):
    edges, _ = _edges(nodes, h)
    lam, U, diag = _cell_eig(V, edges)
    widths = np.diff(edges)
    n2 = 2 * V.n
    K = ks.size
    out = np.empty((K,) + Y0.shape[1:], dtype=complex)
    per_k = max(1, _CHUNK_ELEMS // max(1, widths.size * n2 * n2))
    sign = -1.0 if backward else 1.0
    for lo in range(0, K, per_k):
        sl = slice(lo, min(K, lo + per_k))
        T = _cell_matrices(lam, U, diag, ks[sl], widths, sign)
        if not backward:
            T = T[::-1]
        P = _tree_product(T)
        out[sl] = P @ Y0[sl]
    return out


def _sampled_level(V, ks, nodes, Y0, backward, h):
    edges, node_idx = _edges(nodes, h)
    lam, U, diag = _cell_eig(V, edges)
    widths = np.diff(edges)
    sign = -1.0 if backward else 1.0
    ncell = widths.size
    per_c = max(1, _CHUNK_ELEMS // max(1, ks.size * (2 * V.n) ** 2))
    out = np.empty((len(nodes),) + Y0.shape, dtype=complex)
    Y = Y0.copy()
    order = range(ncell - 1, -1, -1) if backward else range(ncell)
    order = list(order)
    node_at = {int(i): j for j, i in enumerate(node_idx)}
    start = ncell if backward else 0
    out[node_at[start]] = Y
    for lo in range(0, ncell, per_c):
        block = order[lo: lo + per_c]
        cells = np.array(block)
        T = _cell_matrices(lam[cells], None if U is None else U[cells], diag, ks, widths[cells], sign)
        for t, c in enumerate(block):
            Y = T[t] @ Y
            edge = c if backward else c + 1
            j = node_at.get(edge)
            if j is not None:
                out[j] = Y
    return out


def _richardson(levels):
    r1a = (4 * levels[1] - levels[0]) / 3
    r1b = (4 * levels[2] - levels[1]) / 3
    best = (16 * r1b - r1a) / 15
    err = np.max(np.abs(best - r1b), initial=0.0)
    return best, err


def march_coarse(V, ks, nodes, Y0, backward, h=2 * H0):
    """Single-level propagation without extrapolation, for scans."""
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    return _endpoint_level(V, ks, nodes, Y0, backward, h)


def march(V, ks, nodes, Y0, backward, sampled=False, h0=H0, tol=TOL):
    """
    Propagate initial data ``Y0`` (shape ``(K, 2n, m)``) across ``nodes``.

    ``backward`` starts at ``nodes[-1]`` and marches to ``nodes[0]``.
    Returns the scaled state at ``nodes[0]`` (or ``nodes[-1]`` going forward),
    or at every node when ``sampled`` is true, together with the
    extrapolation error estimate.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    level_fn = _sampled_level if sampled else _endpoint_level
    h = h0
    scale = max(1.0, float(np.max(np.abs(Y0))))
    for _ in range(MAX_REFINE + 1):
        levels = [level_fn(V, ks, nodes, Y0, backward, h / 2**j) for j in range(3)]
        best, err = _richardson(levels)
        if not np.all(np.isfinite(best)):
            raise SolverError(
                "non-finite solution values; reduce x_cut or the largest Im k"
            )
        mag = max(scale, float(np.max(np.abs(best))))
        if err <= tol * mag:
            break
        h /= 2
    return best, err / mag
