"""
Domain types: grids, boundary pairs, potentials and scattering data.

All containers are frozen dataclasses holding ``numpy`` arrays. Construction
is cheap and does not validate physics; use the ``validate_*`` functions for
that, so deliberately invalid inputs (negative controls) stay representable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import numlin
from .errors import ValidationError

HERM_TOL = 1e-10
PAIR_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError(f"grid step must be positive, got {self.step}")
        if self.count < 1:
            raise ValidationError(f"grid count must be positive, got {self.count}")

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    @classmethod
    def spanning(cls, start, stop, step):
        count = int(round((stop - start) / step)) + 1
        return cls(float(start), float(step), count)


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True, eq=False)
class BoundaryPair:
    """Matrices ``(A, B)`` of the condition ``-B^dagger psi(0) + A^dagger psi'(0) = 0``."""

    A: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def E(self) -> np.ndarray:
        return numlin.sqrt_psd(numlin.dagger(self.A) @ self.A + numlin.dagger(self.B) @ self.B)

    def normalized(self) -> "BoundaryPair":
        """Representative with ``A^dagger A + B^dagger B = I``."""
        Einv = numlin.inv_sqrt_psd(numlin.dagger(self.A) @ self.A + numlin.dagger(self.B) @ self.B)
        return BoundaryPair(self.A @ Einv, self.B @ Einv)

    def transformed(self, T) -> "BoundaryPair":
        return BoundaryPair(self.A @ T, self.B @ T)

    @classmethod
    def dirichlet(cls, n=1):
        return cls(np.zeros((n, n), complex), np.eye(n, dtype=complex))

    @classmethod
    def neumann(cls, n=1):
        return cls(np.eye(n, dtype=complex), np.zeros((n, n), complex))


@dataclass(frozen=True, eq=False)
class BoundarySubspace:
    projector: np.ndarray

    @property
    def n(self) -> int:
        return self.projector.shape[0] // 2


def boundary_violations(A, B) -> dict:
    A = numlin.as_matrix(A, "A")
    B = numlin.as_matrix(B, "B")
    sym = float(np.max(np.abs(numlin.dagger(B) @ A - numlin.dagger(A) @ B), initial=0.0))
    w = np.linalg.eigvalsh(numlin.hermitize(numlin.dagger(A) @ A + numlin.dagger(B) @ B))
    scale = max(1.0, float(np.abs(A).max(initial=0.0)), float(np.abs(B).max(initial=0.0)))
    return {
        "symmetry_defect": sym / scale**2,
        "min_eigenvalue": float(w[0]),
        "max_eigenvalue": float(w[-1]),
    }


def validate_boundary_pair(A, B) -> BoundaryPair:
    """
    Check the selfadjointness conditions on ``(A, B)`` and return the pair.

    Raises :class:`ValidationError` naming the failed invariant: the
    symmetry ``B^dagger A - A^dagger B = 0`` or positive definiteness of
    ``A^dagger A + B^dagger B``.
    """
    A = numlin.as_matrix(A, "A")
    B = numlin.as_matrix(B, "B")
    if A.shape != B.shape:
        raise ValidationError(f"A and B must have equal shapes, got {A.shape} and {B.shape}")
    v = boundary_violations(A, B)
    if v["symmetry_defect"] > PAIR_TOL:
        raise ValidationError(
            f"boundary symmetry violated: max|B^dagger A - A^dagger B| = {v['symmetry_defect']:.3e}",
            {"symmetry_defect": v["symmetry_defect"]},
        )
    if v["max_eigenvalue"] <= 0 or v["min_eigenvalue"] <= PAIR_TOL * v["max_eigenvalue"]:
        raise ValidationError(
            "boundary definiteness violated: A^dagger A + B^dagger B is not positive definite "
            f"(eigenvalues {v['min_eigenvalue']:.3e} .. {v['max_eigenvalue']:.3e})",
            {"min_eigenvalue": v["min_eigenvalue"]},
        )
    return BoundaryPair(A, B)


def boundary_subspace(pair: BoundaryPair) -> BoundarySubspace:
    """Projector onto ``{(Z1, Z2): -B^dagger Z1 + A^dagger Z2 = 0}``."""
    n = pair.n
    M = np.hstack([-numlin.dagger(pair.B), numlin.dagger(pair.A)])
    _, s, vh = np.linalg.svd(M)
    if s[-1] <= 1e-12 * s[0]:
        raise AssertionError("boundary pair has rank-deficient stacked matrix [A; B]")
    kernel = numlin.dagger(vh)[:, n:]
    P = kernel @ numlin.dagger(kernel)
    return BoundarySubspace(numlin.hermitize(P))


def subspace_distance(p1: BoundaryPair, p2: BoundaryPair) -> float:
    if p1.n != p2.n:
        raise ValidationError("boundary pairs have different dimensions")
    d = boundary_subspace(p1).projector - boundary_subspace(p2).projector
    return float(np.linalg.norm(d, 2))


def boundary_equivalent(p1: BoundaryPair, p2: BoundaryPair, tol=1e-8) -> bool:
    return subspace_distance(p1, p2) <= tol


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True, eq=False)
class Potential:
    """
    Hermitian matrix potential on ``[0, x_cut]``, identically zero beyond.

    ``variant`` is ``"zero"``, ``"sampled"`` (``grid`` and ``values``) or
    ``"catalog"`` (``name`` plus a closed-form ``func`` mapping an array of
    ``x`` to an array of shape ``(len(x), n, n)``).
    """

    n: int
    variant: str
    x_cut: float = 12.0
    grid: Optional[Grid] = None
    values: Optional[np.ndarray] = None
    name: Optional[str] = None
    func: Optional[Callable] = field(default=None, repr=False)
    integrable: bool = True

    @classmethod
    def zero(cls, n=1, x_cut=12.0):
        return cls(n=n, variant="zero", x_cut=float(x_cut))

    @classmethod
    def sampled(cls, grid: Grid, values, x_cut=None):
        values = np.asarray(values, dtype=complex)
        if values.ndim == 1:
            values = values[:, None, None]
        return cls(n=values.shape[1], variant="sampled",
                   x_cut=float(grid.stop if x_cut is None else x_cut),
                   grid=grid, values=values)

    @classmethod
    def catalog(cls, name):
        from .oracle import catalog_potential

        return catalog_potential(name)

    @property
    def is_zero(self) -> bool:
        """True for the zero variant and for sampled values that are all exactly zero."""
        if self.variant == "zero":
            return True
        return self.variant == "sampled" and not np.any(self.values)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((x.size, self.n, self.n), dtype=complex)
        inside = (x >= 0) & (x <= self.x_cut)
        if self.variant == "zero" or not inside.any():
            return out
        if self.variant == "catalog":
            out[inside] = self.func(x[inside])
        elif self.variant == "sampled":
            g = self.grid
            inside &= x <= g.stop
            if inside.any():
                out[inside] = self._spline(x[inside])
        else:
            raise ValidationError(f"unknown potential variant {self.variant!r}")
        return out

    def _spline(self, x):
        spl = self.__dict__.get("_spl")
        if spl is None:
            g = self.grid
            if g.count < 4:
                pts, vals = g.points, self.values

                def spl(t):
                    re = np.stack([np.interp(t, pts, vals[:, i, j].real) + 1j * np.interp(t, pts, vals[:, i, j].imag)
                                   for i in range(self.n) for j in range(self.n)], axis=-1)
                    return re.reshape(t.size, self.n, self.n)
            else:
                cs = CubicSpline(g.points, self.values, axis=0)
                spl = cs
            object.__setattr__(self, "_spl", spl)
        return spl(x)

    def sample(self, grid: Grid) -> "Potential":
        return Potential.sampled(grid, self(grid.points), x_cut=min(self.x_cut, grid.stop))


def validate_potential(V: Potential) -> Potential:
    if V.variant not in ("zero", "sampled", "catalog"):
        raise ValidationError(f"unknown potential variant {V.variant!r}")
    if not V.integrable:
        raise ValidationError(
            f"potential {V.name or ''} is not integrable near x=0: the first moment "
            "condition on V (integral of |V| over [0, inf)) fails",
            {"integrable": 0.0},
        )
    if V.variant == "sampled":
        vals = V.values
        if vals is None or V.grid is None or vals.shape[0] != V.grid.count:
            raise ValidationError("sampled potential needs one value per grid point")
        if not np.all(np.isfinite(vals)):
            raise ValidationError(
                "sampled potential has non-finite values; V must be integrable on [0, x_cut]",
                {"nonfinite": float(np.sum(~np.isfinite(vals)))},
            )
        defect = float(np.max(np.abs(vals - numlin.dagger(vals)), initial=0.0))
        if defect > HERM_TOL * max(1.0, float(np.abs(vals).max(initial=0.0))):
            raise ValidationError(f"sampled potential is not hermitian (defect {defect:.3e})",
                                  {"hermitian_defect": defect})
        if V.x_cut < V.grid.stop - 1e-12:
            raise ValidationError("x_cut must not be smaller than the last grid point")
    return V


def potential_moments(V: Potential, step=0.01):
    """
    Trapezoidal estimates of ``int |V|`` and ``int x |V|`` over ``[0, x_cut]``.

    ``|V|`` is the matrix operator norm. Sampled potentials use their own
    grid; closed forms are sampled with ``step``.
    """
    if V.is_zero:
        return 0.0, 0.0
    if V.variant == "sampled":
        if V.grid is None or V.grid.count == 0:
            raise ValidationError("empty grid")
        x, vals = V.grid.points, V.values
    else:
        x = Grid.spanning(0.0, V.x_cut, step).points
        vals = V(x)
    norms = np.linalg.norm(vals, ord=2, axis=(1, 2))
    return float(np.trapezoid(norms, x)), float(np.trapezoid(x * norms, x))


# ---------------------------------------------------------------------------
# scattering data


@dataclass(frozen=True, eq=False)
class ExpPolyTerm:
    """One summand ``C * y**power * exp(-rate * y)``."""

    C: np.ndarray
    rate: float
    power: int = 0

    def __post_init__(self):
        object.__setattr__(self, "C", np.atleast_2d(np.asarray(self.C, dtype=complex)))
        if not self.rate > 0:
            raise ValidationError(f"term rate must be positive, got {self.rate}")
        if self.power < 0 or int(self.power) != self.power:
            raise ValidationError(f"term power must be a nonnegative integer, got {self.power}")
        object.__setattr__(self, "power", int(self.power))
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True, eq=False)
class FsRepresentation:
    """``F_s`` as exponential polynomials on each half line, plus ``S_inf``."""

    S_inf: np.ndarray
    right_terms: tuple = ()
    left_terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "S_inf", np.atleast_2d(np.asarray(self.S_inf, dtype=complex)))
        object.__setattr__(self, "right_terms", tuple(self.right_terms))
        object.__setattr__(self, "left_terms", tuple(self.left_terms))

    @property
    def n(self) -> int:
        return self.S_inf.shape[0]


@dataclass(frozen=True, eq=False)
class BoundState:
    kappa: float
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", np.atleast_2d(np.asarray(self.M, dtype=complex)))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def rank(self) -> int:
        s = np.linalg.svd(self.M, compute_uv=False)
        return int(np.sum(s > 1e-8 * s[0])) if s.size and s[0] > 0 else 0


@dataclass(frozen=True, eq=False)
class BoundStateData:
    states: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    @property
    def kappas(self) -> np.ndarray:
        return np.array([s.kappa for s in self.states])

    @property
    def total_count(self) -> int:
        """Number of bound states counted with multiplicity (sum of ranks)."""
        return int(sum(s.rank for s in self.states))


def validate_bound_states(bs: BoundStateData) -> BoundStateData:
    k = bs.kappas
    if np.any(k <= 0):
        raise ValidationError("bound-state kappas must be positive")
    ks = np.sort(k)
    if ks.size > 1 and np.any(np.diff(ks) <= 1e-8 * ks[1:]):
        raise ValidationError("bound-state kappas must be pairwise distinct")
    for s in bs:
        if numlin.hermitian_defect(s.M) > HERM_TOL * max(1.0, np.abs(s.M).max()):
            raise ValidationError(f"normalization matrix at kappa={s.kappa} is not hermitian")
        w = np.linalg.eigvalsh(numlin.hermitize(s.M))
        if w[0] < -1e-8 * max(1.0, abs(w[-1])):
            raise ValidationError(f"normalization matrix at kappa={s.kappa} is not nonnegative")
        if s.rank < 1:
            raise ValidationError(f"normalization matrix at kappa={s.kappa} has rank zero")
    return bs


@dataclass(frozen=True, eq=False)
class ScatteringData:
    """
    Scattering matrix (analytic ``F_s`` terms or samples of ``S(k)``) plus bound states.

    For ``variant == "sampled"`` the samples cover ``k_grid`` with
    ``k_grid.start > 0``; negative ``k`` are implied by ``S(-k) = S(k)^dagger``.
    """

    variant: str
    n: int
    fs: Optional[FsRepresentation] = None
    k_grid: Optional[Grid] = None
    S_values: Optional[np.ndarray] = None
    S_inf_sampled: Optional[np.ndarray] = None
    bound_states: BoundStateData = field(default_factory=BoundStateData)

    @classmethod
    def analytic(cls, S_inf, right_terms=(), left_terms=(), bound_states=()):
        fs = FsRepresentation(S_inf, right_terms, left_terms)
        if not isinstance(bound_states, BoundStateData):
            bound_states = BoundStateData(tuple(bound_states))
        return cls(variant="analytic", n=fs.n, fs=fs, bound_states=bound_states)

    @classmethod
    def sampled(cls, k_grid: Grid, S_values, S_inf, bound_states=()):
        S_values = np.asarray(S_values, dtype=complex)
        if S_values.ndim == 1:
            S_values = S_values[:, None, None]
        if not isinstance(bound_states, BoundStateData):
            bound_states = BoundStateData(tuple(bound_states))
        return cls(variant="sampled", n=S_values.shape[1], k_grid=k_grid, S_values=S_values,
                   S_inf_sampled=np.atleast_2d(np.asarray(S_inf, dtype=complex)),
                   bound_states=bound_states)

    @property
    def S_inf(self) -> np.ndarray:
        return self.fs.S_inf if self.variant == "analytic" else self.S_inf_sampled

    def with_bound_states(self, bound_states) -> "ScatteringData":
        if not isinstance(bound_states, BoundStateData):
            bound_states = BoundStateData(tuple(bound_states))
        return ScatteringData(self.variant, self.n, self.fs, self.k_grid, self.S_values,
                              self.S_inf_sampled, bound_states)


def scattering_data_warnings(data: ScatteringData) -> list:
    """Invariant violations that do not prevent computation (non-hermitian terms etc.)."""
    out = []
    S_inf = data.S_inf
    if numlin.hermitian_defect(S_inf) > 1e-8:
        out.append("S_inf is not hermitian")
    if np.max(np.abs(S_inf @ S_inf - np.eye(data.n))) > 1e-8:
        out.append("S_inf is not involutory")
    if data.variant == "analytic":
        for side in ("right_terms", "left_terms"):
            for t in getattr(data.fs, side):
                if numlin.hermitian_defect(t.C) > HERM_TOL * max(1.0, np.abs(t.C).max()):
                    out.append(f"non-hermitian coefficient in {side} (rate {t.rate}, power {t.power})")
    else:
        if not np.all(np.isfinite(data.S_values)):
            out.append("non-finite S samples")
        if data.k_grid.start <= 0:
            out.append("sampled k grid must start above zero")
    try:
        validate_bound_states(data.bound_states)
    except ValidationError as exc:
        out.append(str(exc))
    return out


def validate_scattering_data(data: ScatteringData) -> ScatteringData:
    """Structural checks only; physical conditions are the business of :mod:`hls.charcheck`."""
    if data.variant not in ("analytic", "sampled"):
        raise ValidationError(f"unknown scattering data variant {data.variant!r}")
    if data.variant == "analytic":
        for t in tuple(data.fs.right_terms) + tuple(data.fs.left_terms):
            if t.C.shape != (data.n, data.n):
                raise ValidationError("term coefficient has wrong shape")
    else:
        if data.S_values.shape[0] != data.k_grid.count:
            raise ValidationError("need one S sample per k grid point")
        if not np.all(np.isfinite(data.S_values)):
            raise ValidationError("non-finite S samples")
        if data.k_grid.start <= 0:
            raise ValidationError("sampled k grid must start above zero")
    for s in data.bound_states:
        if s.M.shape != (data.n, data.n):
            raise ValidationError("normalization matrix has wrong shape")
    validate_bound_states(data.bound_states)
    return data


def as_terms(entries: Sequence) -> tuple:
    """Build terms from ``(C, rate, power)`` tuples."""
    return tuple(ExpPolyTerm(np.atleast_2d(C), rate, power) for C, rate, power in entries)
