"""
Dense complex linear-algebra helpers.

Matrices are plain two-dimensional ``numpy`` arrays of dtype ``complex128``.
Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import GridTooCoarseError, SolverError, ValidationError

DEFAULT_NULL_TOL = 1e-8
_EIGVEC_COND_LIMIT = 1e8
_KRON_MAX_N = 16


def as_matrix(M, name="matrix", square=True) -> np.ndarray:
    """Coerce ``M`` to a finite complex 2-D array, raising on bad shape or values."""
    arr = np.atleast_2d(np.asarray(M, dtype=complex))
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def dagger(M):
    return np.conj(np.swapaxes(M, -1, -2))


def hermitian_defect(M) -> float:
    M = as_matrix(M)
    return float(np.max(np.abs(M - dagger(M)), initial=0.0))


def is_hermitian(M, tol=0.0) -> bool:
    """True iff the max-entry norm of ``M - M^dagger`` is at most ``tol``."""
    return hermitian_defect(M) <= tol


def hermitize(M):
    return 0.5 * (M + dagger(M))


def mat_exp(M, t=1.0) -> np.ndarray:
    """
    Return ``exp(-M t)``.

    Diagonalizable input goes through an eigendecomposition; when the
    eigenvector matrix is badly conditioned (cond > 1e8) the Pade
    scaling-and-squaring routine of scipy is used instead.
    """
    M = as_matrix(M, "M")
    if M.shape[0] == 0:
        return M.copy()
    if np.allclose(M, dagger(M), rtol=0.0, atol=1e-14 * max(1.0, np.abs(M).max())):
        w, U = np.linalg.eigh(hermitize(M))
        return (U * np.exp(-w * t)) @ dagger(U)
    w, V = np.linalg.eig(M)
    if np.linalg.cond(V) > _EIGVEC_COND_LIMIT:
        return scipy.linalg.expm(-M * t)
    return (V * np.exp(-w * t)) @ np.linalg.inv(V)


def sylvester_solve(A, B, C) -> np.ndarray:
    """
    Solve ``A X + X B = C``.

    Small systems (n <= 16) are vectorized into a Kronecker linear system;
    larger ones use Bartels-Stewart from scipy. A spectral collision
    (``lambda_i(A) = -lambda_j(B)``) raises :class:`SolverError`.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C", square=False)
    m, n = A.shape[0], B.shape[0]
    if C.shape != (m, n):
        raise ValidationError(f"C must have shape {(m, n)}, got {C.shape}")
    if max(m, n) > _KRON_MAX_N:
        ev = np.add.outer(np.linalg.eigvals(A), np.linalg.eigvals(B))
        if np.min(np.abs(ev)) <= 1e-13 * (np.linalg.norm(A) + np.linalg.norm(B)):
            raise SolverError("singular Sylvester operator: spectra of A and -B intersect")
        return scipy.linalg.solve_sylvester(A, B, C)
    # row-major vec: vec(A X) = (A kron I) x, vec(X B) = (I kron B^T) x
    L = np.kron(A, np.eye(n)) + np.kron(np.eye(m), B.T)
    s = np.linalg.svd(L, compute_uv=False)
    if s[-1] <= 1e-13 * s[0]:
        raise SolverError(
            f"singular Sylvester operator (smallest singular value {s[-1]:.3e})"
        )
    return np.linalg.solve(L, C.reshape(-1)).reshape(m, n)


def nullspace(M, tol=DEFAULT_NULL_TOL):
    """
    Orthonormal basis of the numerical null space of ``M``.

    A right-singular vector is kept when its singular value is at most
    ``tol`` times the largest singular value. Returns ``(basis, nullity)``
    with ``basis`` of shape ``(cols, nullity)``.
    """
    if tol < 0:
        raise ValidationError("tol must be nonnegative")
    M = as_matrix(M, square=False)
    cols = M.shape[1]
    _, s, vh = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    full = np.zeros(cols)
    full[: s.size] = s
    keep = full <= tol * smax if smax > 0 else np.ones(cols, dtype=bool)
    basis = dagger(vh)[:, keep]
    return basis, int(basis.shape[1])


def singular_values(M):
    return np.linalg.svd(as_matrix(M, square=False), compute_uv=False)


def inv_sqrt_psd(M) -> np.ndarray:
    """Hermitian positive definite ``X`` with ``X M X = I``."""
    M = as_matrix(M, "M")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if hermitian_defect(M) > 1e-10 * scale:
        raise ValidationError("inv_sqrt_psd: input is not hermitian",
                              {"hermitian_defect": hermitian_defect(M)})
    w, U = np.linalg.eigh(hermitize(M))
    if w.size and w[0] <= 1e-14 * max(abs(w[-1]), 1e-300):
        raise ValidationError("inv_sqrt_psd: input is not positive definite",
                              {"min_eigenvalue": float(w[0])})
    return (U / np.sqrt(w)) @ dagger(U)


def sqrt_psd(M) -> np.ndarray:
    w, U = np.linalg.eigh(hermitize(as_matrix(M)))
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ dagger(U)


def projector(basis) -> np.ndarray:
    """Orthogonal projector onto the column span of ``basis``."""
    basis = np.asarray(basis, dtype=complex)
    if basis.shape[1] == 0:
        return np.zeros((basis.shape[0], basis.shape[0]), dtype=complex)
    q, _ = np.linalg.qr(basis)
    return q @ dagger(q)


def arg_det_unwrap(values, jump_limit=np.pi - 0.1) -> float:
    """
    Continuous change of ``arg det`` along an ordered path of matrices.

    The result is ``arg det(values[-1]) - arg det(values[0])`` after
    nearest-branch continuation. A single step whose wrapped phase change
    reaches ``jump_limit`` means the path is under-resolved and raises
    :class:`GridTooCoarseError`.
    """
    dets = np.array([np.linalg.det(as_matrix(v)) for v in values])
    if dets.size < 2:
        return 0.0
    if np.any(dets == 0):
        raise SolverError("arg_det_unwrap: determinant vanishes on the path")
    steps = np.angle(dets[1:] / dets[:-1])
    worst = int(np.argmax(np.abs(steps)))
    if abs(steps[worst]) >= jump_limit:
        raise GridTooCoarseError(
            f"phase jump {steps[worst]:.3f} rad between samples {worst} and {worst + 1}; "
            "refine the parameter grid"
        )
    return float(np.sum(steps))
