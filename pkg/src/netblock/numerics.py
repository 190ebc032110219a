"""Dense matrix primitives: eigen/singular decompositions, SVT, norms, rank."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DataError, NumericalError

__all__ = [
    "SpectrumResult",
    "sym_eig_topk",
    "sym_eig_full",
    "svd_full",
    "svt",
    "svt_symmetric",
    "operator_norm",
    "numerical_rank",
    "is_symmetric",
]

SYM_TOL = 1e-10


@dataclass(frozen=True)
class SpectrumResult:
    """Eigen- or singular values with an orthonormal basis in the columns of ``vectors``.

    For an SVD, ``vectors`` holds the left vectors and ``right`` the right ones.
    """

    values: np.ndarray
    vectors: np.ndarray
    right: np.ndarray | None = None


def _finite(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise DataError("matrix has non-finite entries")
    return M


def is_symmetric(M: np.ndarray, tol: float = SYM_TOL) -> bool:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(float(np.max(np.abs(M))), 1.0) if M.size else 1.0
    return float(np.max(np.abs(M - M.T), initial=0.0)) <= tol * scale


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude coordinate is positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _ordered(values, vectors, order):
    # ties broken by the row index of each eigenvector's dominant coordinate
    dominant = np.argmax(np.abs(vectors), axis=0)
    primary = -np.abs(values) if order == "by-magnitude" else -values
    perm = np.lexsort((dominant, primary))
    return values[perm], vectors[:, perm]


def sym_eig_full(M, order: Literal["by-magnitude", "by-value"] = "by-magnitude") -> SpectrumResult:
    """All eigenpairs of a symmetric matrix in the requested order."""
    M = _finite(M)
    if not is_symmetric(M):
        raise DataError("matrix is not symmetric")
    try:
        values, vectors = np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    vectors = _orient(vectors)
    values, vectors = _ordered(values, vectors, order)
    return SpectrumResult(values, vectors)


def sym_eig_topk(M, k: int, order: Literal["by-magnitude", "by-value"] = "by-magnitude") -> SpectrumResult:
    """Leading ``k`` eigenpairs of symmetric ``M``.

    ``by-magnitude`` sorts by ``|lambda|`` descending (the ordering used for
    spectral clustering); ``by-value`` sorts by ``lambda`` descending.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DataError(f"expected a square matrix, got shape {M.shape}")
    if not (1 <= k <= M.shape[0]):
        raise DataError(f"k={k} out of range [1, {M.shape[0]}]")
    if order not in ("by-magnitude", "by-value"):
        raise DataError(f"unknown order {order!r}")
    full = sym_eig_full(M, order)
    return SpectrumResult(full.values[:k].copy(), full.vectors[:, :k].copy())


def svd_full(M) -> SpectrumResult:
    """Thin SVD with singular values descending: ``M = U diag(s) V^T``."""
    M = _finite(M)
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    return SpectrumResult(s, U, Vt.T)


def svt(M, tau: float) -> np.ndarray:
    """Singular value soft-thresholding, the proximal map of ``tau * ||.||_*``.

    Symmetric input (within 1e-10 relative) gives exactly symmetric output.
    """
    if tau < 0:
        raise DataError(f"tau must be nonnegative, got {tau}")
    M = _finite(M)
    res = svd_full(M)
    s = np.maximum(res.values - tau, 0.0)
    out = (res.vectors * s) @ res.right.T
    if is_symmetric(M):
        out = 0.5 * (out + out.T)
    return out


def svt_symmetric(M, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """SVT of a symmetric matrix through its eigendecomposition.

    Returns the thresholded matrix and the signed shrunk eigenvalues.  Equal to
    :func:`svt` because the singular values of ``M`` are ``|lambda_j|``.
    """
    if tau < 0:
        raise DataError(f"tau must be nonnegative, got {tau}")
    M = _finite(M)
    ev, Q = np.linalg.eigh(0.5 * (M + M.T))
    s = np.abs(ev) - tau
    s = np.where(s > 0, np.where(ev > 0, s, -s), 0.0)
    out = (Q * s) @ Q.T
    return np.triu(out) + np.triu(out, 1).T, s


def operator_norm(M) -> float:
    """Largest singular value."""
    M = _finite(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def numerical_rank(M, rel_tol: float = 1e-8) -> int:
    """Number of singular values above ``rel_tol * sigma_1``; 0 for the zero matrix."""
    if rel_tol <= 0:
        raise DataError("rel_tol must be positive")
    s = svd_full(M).values
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))
