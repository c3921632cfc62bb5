"""Scattering data to potential and boundary and back again."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import direct, marchenko as mk
from .errors import SolverError
from .model import BoundaryPair, Grid, ScatteringData, subspace_distance

# the recovered potential is splined; steep potentials need a fine grid
X_STEP = 0.005


@dataclass
class RoundtripReport:
    S_deviation: float
    kappa_deviation: float
    M_deviation: float
    boundary_distance: Optional[float]
    kappas: list = field(default_factory=list)
    inverse: Optional[mk.InverseResult] = None
    direct: Optional[direct.DirectResult] = None

    def to_dict(self):
        return {"S_deviation": self.S_deviation, "kappa_deviation": self.kappa_deviation,
                "M_deviation": self.M_deviation, "boundary_distance": self.boundary_distance,
                "kappas": [float(k) for k in self.kappas]}

    def within(self, s_tol=1e-4, kappa_tol=1e-6, m_tol=1e-5, b_tol=1e-6) -> bool:
        ok = self.S_deviation <= s_tol and self.kappa_deviation <= kappa_tol and self.M_deviation <= m_tol
        return ok and (self.boundary_distance is None or self.boundary_distance <= b_tol)


def _reference_S(data: ScatteringData, ks):
    if data.variant == "analytic":
        return mk.s_from_data(data, ks)
    grid = data.k_grid.points
    out = np.empty((ks.size, data.n, data.n), dtype=complex)
    for i in range(data.n):
        for j in range(data.n):
            v = data.S_values[:, i, j]
            out[:, i, j] = np.interp(ks, grid, v.real) + 1j * np.interp(ks, grid, v.imag)
    return out


def roundtrip(data: ScatteringData, reference_boundary: Optional[BoundaryPair] = None,
              x_grid: Optional[Grid] = None, k_max=direct.DEFAULT_K_MAX, k_points=121,
              kappa_max=direct.DEFAULT_KAPPA_MAX, pmap=None) -> RoundtripReport:
    """
    Invert ``data``, solve the direct problem for the result and compare.

    Deviations are maxima of spectral norms; missing or extra bound states
    give an infinite ``kappa_deviation``.
    """
    if x_grid is None and data.variant == "analytic":
        x_grid = mk.default_x_grid(data, X_STEP)
    inv = mk.invert(data, x_grid)
    if inv.potential is None or inv.boundary is None or inv.errors:
        msg = "; ".join(f"{s}: {m}" for s, m in inv.errors) or "inverse problem failed"
        raise SolverError(f"round trip needs a complete inverse result ({msg})")
    res = direct.solve_direct(inv.potential, inv.boundary, k_max, k_points, kappa_max, pmap=pmap)
    ks = res.k_grid.points
    if data.variant == "sampled":
        sel = (ks >= data.k_grid.start) & (ks <= data.k_grid.stop)
    else:
        sel = np.ones(ks.size, dtype=bool)
    dS = np.linalg.norm(res.S_values[sel] - _reference_S(data, ks[sel]), ord=2, axis=(1, 2))
    s_dev = float(dS.max(initial=0.0))
    want = sorted(data.bound_states, key=lambda b: b.kappa)
    got = sorted(res.bound_states, key=lambda b: b.kappa)
    if len(want) != len(got):
        k_dev = m_dev = float("inf")
    else:
        k_dev = max((abs(a.kappa - b.kappa) for a, b in zip(want, got)), default=0.0)
        m_dev = max((float(np.linalg.norm(a.M - b.M, 2)) for a, b in zip(want, got)), default=0.0)
    dist = None if reference_boundary is None else subspace_distance(inv.boundary, reference_boundary)
    return RoundtripReport(s_dev, float(k_dev), float(m_dev), dist, [b.kappa for b in got], inv, res)
