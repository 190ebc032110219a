"""Comparison estimators: blockwise averaging, its low-rank truncation (AvgLR),
and averaging after spectral truncation of the adjacency matrix."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .model import ConnectivityMatrix, MembershipMatrix, as_matrix, average_layers
from .numerics import numerical_rank, sym_eig_full
from .tuning import subset_problem

__all__ = [
    "BaselineResult",
    "averaging_estimator",
    "avg_lowrank",
    "spectral_embedding_estimator",
    "truncation_errors",
    "block_average",
    "RankCvReport",
    "cv_avg_lowrank",
]


@dataclass(frozen=True)
class BaselineResult:
    B_hat: ConnectivityMatrix
    d_hat: int
    method: str


def _sizes(Z_hat: MembershipMatrix) -> np.ndarray:
    sizes = Z_hat.sizes.astype(float)
    if np.any(sizes == 0):
        raise DataError(f"estimated communities {np.flatnonzero(sizes == 0).tolist()} are empty")
    return sizes


def block_average(R: np.ndarray, sizes: np.ndarray, rho: float,
                  include_diagonal: bool = True, diag_sums: np.ndarray | None = None) -> np.ndarray:
    """``R_kl / (rho n_k n_l)`` from block sums ``R = Z^T A Z``.

    With ``include_diagonal=False`` the diagonal cells are removed from the
    diagonal blocks (``diag_sums[k]`` = sum of ``A_ii`` over community ``k``)
    and the denominator becomes ``n_k (n_k - 1)``.
    """
    if not rho > 0:
        raise DataError("rho must be positive")
    denom = np.outer(sizes, sizes)
    R = np.array(R, dtype=float)
    if not include_diagonal:
        if diag_sums is None:
            raise DataError("diag_sums required when excluding diagonal cells")
        R[np.diag_indices_from(R)] -= diag_sums
        denom[np.diag_indices_from(denom)] = sizes * (sizes - 1)
        if np.any(denom == 0):
            raise DataError("singleton community has no off-diagonal cells")
    B = R / (rho * denom)
    return 0.5 * (B + B.T)


def averaging_estimator(Y, Z_hat: MembershipMatrix, rho: float,
                        include_diagonal: bool = True) -> BaselineResult:
    """``B_kl = Z_k^T Y Z_l / (rho n_k n_l)``: the unpenalized least-squares solution."""
    Y = as_matrix(Y)
    if Y.shape != (Z_hat.n, Z_hat.n):
        raise DataError(f"Y has shape {Y.shape}, membership has n={Z_hat.n}")
    sizes = _sizes(Z_hat)
    Zm = Z_hat.Z
    diag = None if include_diagonal else np.bincount(Z_hat.labels, weights=np.diag(Y), minlength=Z_hat.K)
    B = block_average(Zm.T @ Y @ Zm, sizes, rho, include_diagonal, diag)
    return BaselineResult(ConnectivityMatrix(B, probability=False), numerical_rank(B), "avg")


def _truncate(B: np.ndarray, d: int) -> np.ndarray:
    spec = sym_eig_full(B, "by-magnitude")
    U = spec.vectors[:, :d]
    out = (U * spec.values[:d]) @ U.T
    return 0.5 * (out + out.T)


def avg_lowrank(Y, Z_hat: MembershipMatrix, rho: float, d: int,
                include_diagonal: bool = True) -> BaselineResult:
    """Keep the ``d`` largest-magnitude eigenpairs of the averaging estimate."""
    if not (1 <= d <= Z_hat.K):
        raise DataError(f"d={d} out of range [1, {Z_hat.K}]")
    avg = averaging_estimator(Y, Z_hat, rho, include_diagonal).B_hat.entries
    B = _truncate(avg, d)
    return BaselineResult(ConnectivityMatrix(B, probability=False), d, "avglr")


def spectral_embedding_estimator(Y, Z_hat: MembershipMatrix, rho: float, r: int) -> BaselineResult:
    """Average the entries of the rank-``r`` spectral truncation of ``Y`` blockwise."""
    Y = as_matrix(Y)
    n = Y.shape[0]
    if not (1 <= r <= n):
        raise DataError(f"r={r} out of range [1, {n}]")
    spec = sym_eig_full(Y, "by-magnitude")
    U = spec.vectors[:, :r]
    Yr = (U * spec.values[:r]) @ U.T
    Yr = 0.5 * (Yr + Yr.T)
    res = averaging_estimator(Yr, Z_hat, rho)
    return BaselineResult(res.B_hat, res.d_hat, "spectral")


def truncation_errors(Y, Z_hat: MembershipMatrix, rho: float, B_true,
                      r_values: Sequence[int]) -> np.ndarray:
    """Relative error ``||B^(r) - B*||_F / ||B*||_F`` for each ``r``, from one eigendecomposition.

    ``Z^T Y_r Z = sum_{j<=r} lambda_j (Z^T u_j)(Z^T u_j)^T``, so all truncation
    levels come from cumulative sums.
    """
    Y = as_matrix(Y)
    B_true = as_matrix(B_true)
    sizes = _sizes(Z_hat)
    spec = sym_eig_full(Y, "by-magnitude")
    P = Z_hat.Z.T @ spec.vectors  # K x n
    denom = rho * np.outer(sizes, sizes)
    r_values = np.asarray(r_values, dtype=int)
    if r_values.min() < 1 or r_values.max() > Y.shape[0]:
        raise DataError("truncation ranks out of range")
    out = np.empty(r_values.size)
    acc = np.zeros((Z_hat.K, Z_hat.K))
    done = 0
    norm = np.linalg.norm(B_true)
    for idx in np.argsort(r_values, kind="stable"):
        r = r_values[idx]
        if r > done:
            Pr = P[:, done:r]
            acc = acc + (Pr * spec.values[done:r]) @ Pr.T
            done = r
        out[idx] = np.linalg.norm(acc / denom - B_true) / norm
    return out


@dataclass
class RankCvReport:
    ranks: np.ndarray
    split_losses: np.ndarray  # (n_splits, K)
    selected_rank: int
    result: BaselineResult


def cv_avg_lowrank(sample, Z_hat: MembershipMatrix, plan) -> RankCvReport:
    """Choose the AvgLR rank by held-out squared error over the splits of ``plan``.

    Each split truncates the training-layer averaging estimate to every rank
    ``1..K`` and scores ``||A_val - Z (rho B) Z^T||_F^2``.  Ties go to the smaller rank.
    """
    K = Z_hat.K
    sizes = _sizes(Z_hat)
    ranks = np.arange(1, K + 1)
    losses = np.zeros((len(plan.splits), K))
    for s, (train, val) in enumerate(plan.splits):
        fit = subset_problem(sample, Z_hat, train)
        held = subset_problem(sample, Z_hat, val)
        avg = block_average(fit.R, sizes, sample.rho)
        spec = sym_eig_full(avg, "by-magnitude")
        for j, d in enumerate(ranks):
            U = spec.vectors[:, :d]
            losses[s, j] = held.loss(sample.rho * ((U * spec.values[:d]) @ U.T))
    total = losses.sum(axis=0)
    d = int(ranks[np.flatnonzero(total == total.min())[0]])
    return RankCvReport(ranks, losses, d, avg_lowrank(average_layers(sample), Z_hat, sample.rho, d))
