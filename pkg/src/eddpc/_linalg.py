"""Shared numerical-rank rule and subspace helpers.

Every rank decision in the package goes through :func:`rank_tolerance` so
that persistency-of-excitation checks, kernel extraction and null-space
computations agree on what counts as zero.
"""

import numpy as np

RANK_RTOL = 1e-10


def rank_tolerance(shape, smax: float) -> float:
    """Threshold below which a singular value is treated as zero."""
    return max(shape) * smax * RANK_RTOL if smax > 0 else 0.0


def singular_values(M: np.ndarray) -> np.ndarray:
    M = np.atleast_2d(M)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def numerical_rank(M: np.ndarray) -> int:
    M = np.atleast_2d(M)
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tolerance(M.shape, s[0])))


def _svd_split(M: np.ndarray):
    M = np.atleast_2d(M)
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = 0
    if s.size and s[0] > 0:
        r = int(np.sum(s > rank_tolerance(M.shape, s[0])))
    return U, s, Vt, r


def orth(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis for the column span of ``M``."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, _, _, r = _svd_split(M)
    return U[:, :r]


def null_space(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as columns) for the right kernel of ``M``."""
    M = np.atleast_2d(M)
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    _, _, Vt, r = _svd_split(M)
    return Vt[r:].T.copy()


def left_null_space(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as rows) for the left kernel of ``M``."""
    M = np.atleast_2d(M)
    if M.shape[1] == 0:
        return np.eye(M.shape[0])
    U, _, _, r = _svd_split(M)
    return U[:, r:].T.copy()


def condition_number(M: np.ndarray) -> float:
    """Ratio of extreme singular values over the ``min(rows, cols)`` spectrum.

    Returns ``inf`` for a matrix with an exactly vanishing singular value.
    """
    s = singular_values(M)
    if s.size == 0 or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def projection_residual(basis: np.ndarray, vectors: np.ndarray) -> float:
    """Largest relative distance of the columns of ``vectors`` from ``im(basis)``."""
    Q = orth(basis)
    V = np.asarray(vectors, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    R = V - Q @ (Q.T @ V)
    norms = np.maximum(np.linalg.norm(V, axis=0), np.finfo(float).tiny)
    return float(np.max(np.linalg.norm(R, axis=0) / norms)) if V.shape[1] else 0.0


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between ``im(A)`` and ``im(B)``.

    Uses the sine formulation, which stays accurate for tiny angles. When the
    dimensions differ, the surplus directions are reported as right angles.
    """
    Qa, Qb = orth(A), orth(B)
    if Qa.shape[1] < Qb.shape[1]:
        Qa, Qb = Qb, Qa
    if Qb.shape[1] == 0:
        return np.full(Qa.shape[1], np.pi / 2)
    R = Qb - Qa @ (Qa.T @ Qb)
    sines = np.sort(np.clip(np.linalg.svd(R, compute_uv=False), 0.0, 1.0))
    extra = np.full(Qa.shape[1] - Qb.shape[1], np.pi / 2)
    return np.concatenate([np.arcsin(sines), extra])


def same_span(A: np.ndarray, B: np.ndarray, tol: float = 1e-8) -> bool:
    return projection_residual(A, B) <= tol and projection_residual(B, A) <= tol
