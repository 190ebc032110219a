"""Node clustering: spectral embeddings, k-means, diagonal GMM, label alignment, ARI."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import comb
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .errors import DataError, NumericalError
from .model import MembershipMatrix, NetworkSample, as_matrix
from .numerics import sym_eig_topk

__all__ = [
    "ClusterAssignment",
    "AlignmentResult",
    "DegenerateClusterWarning",
    "kmeans",
    "gmm_cluster",
    "spectral_cluster",
    "bias_adjusted_matrix",
    "bias_adjusted_spectral",
    "align_labels",
    "adjusted_rand_index",
    "cluster_points",
]

Engine = Literal["gmm", "kmeans"]
EXHAUSTIVE_MAX_K = 8


class DegenerateClusterWarning(UserWarning):
    """Fewer distinct clusters than requested."""


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    K: int
    method: str
    features: str = ""

    @property
    def membership(self) -> MembershipMatrix:
        return MembershipMatrix(self.labels, self.K)


@dataclass(frozen=True)
class AlignmentResult:
    permutation: np.ndarray  # estimated label k -> permutation[k]
    misclustering_rate: float
    aligned: np.ndarray


def _seeds(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# -- k-means ----------------------------------------------------------------

def _plusplus(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    m = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(m)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            centers[k] = X[rng.integers(m)]
        else:
            centers[k] = X[rng.choice(m, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[k]) ** 2, axis=1))
    return centers


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = np.sum(X ** 2, axis=1)[:, None] - 2.0 * X @ C.T + np.sum(C ** 2, axis=1)[None, :]
    return np.maximum(d, 0.0)


def _lloyd(X, centers, max_iter, tol):
    K = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        D = _sq_dists(X, centers)
        new = np.argmin(D, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            members = labels == k
            if members.any():
                centers[k] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its center
                far = int(np.argmax(D[np.arange(X.shape[0]), labels]))
                centers[k] = X[far]
                labels[far] = k
    D = _sq_dists(X, centers)
    labels = np.argmin(D, axis=1)
    sse = float(D[np.arange(X.shape[0]), labels].sum())
    return labels, centers, sse


def _kmeans_full(points, K: int, seed: int = 0, restarts: int = 10, max_iter: int = 300):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m = X.shape[0]
    if K < 1 or m < K:
        raise DataError(f"cannot form {K} clusters from {m} points")
    best = None
    for rng in _seeds(seed, max(restarts, 1)):
        labels, centers, sse = _lloyd(X, _plusplus(X, K, rng), max_iter, 0.0)
        if best is None or sse < best[2]:
            best = (labels, centers, sse)
    labels = best[0]
    if np.unique(labels).size < K:
        warnings.warn(f"k-means found {np.unique(labels).size} distinct clusters, {K} requested",
                      DegenerateClusterWarning, stacklevel=3)
    return best


def kmeans(points, K: int, seed: int = 0, restarts: int = 10, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm from k-means++ seeds; best of ``restarts`` by within-cluster SSE."""
    return _kmeans_full(points, K, seed, restarts, max_iter)[0]


# -- diagonal Gaussian mixture ----------------------------------------------

def _gmm_em(X, resp, floor, max_iter, tol):
    m, p = X.shape
    trace = []
    for _ in range(max_iter):
        nk = resp.sum(axis=0) + 1e-300
        weights = nk / m
        means = (resp.T @ X) / nk[:, None]
        var = (resp.T @ (X ** 2)) / nk[:, None] - means ** 2
        var = np.maximum(var, floor)
        # log N(x | mu_k, diag(var_k)) expanded so it stays a pair of matmuls
        mahal = ((X ** 2) @ (1.0 / var).T - 2.0 * X @ (means / var).T
                 + np.sum(means ** 2 / var, axis=1)[None, :])
        log_prob = -0.5 * (np.sum(np.log(2 * np.pi * var), axis=1)[None, :] + mahal)
        weighted = log_prob + np.log(weights + 1e-300)[None, :]
        norm = logsumexp(weighted, axis=1)
        ll = float(norm.sum())
        resp = np.exp(weighted - norm[:, None])
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * max(1.0, abs(trace[-1])):
            break
    return resp, trace


def _gmm_full(points, K: int, seed: int = 0, restarts: int = 10, max_iter: int = 500, tol: float = 1e-10):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m = X.shape[0]
    if K < 1 or m < K:
        raise DataError(f"cannot form {K} clusters from {m} points")
    if K == 1:
        return np.zeros(m, dtype=int), [0.0]
    floor = 1e-8 * max(float(np.var(X, axis=0).max()), 1e-300)
    best = None
    for r, rng in enumerate(_seeds(seed, max(restarts, 1))):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateClusterWarning)
            init = kmeans(X, K, seed=int(rng.integers(2 ** 31)), restarts=1)
        resp = np.zeros((m, K))
        resp[np.arange(m), init] = 1.0
        resp, trace = _gmm_em(X, resp, floor, max_iter, tol)
        if not np.isfinite(trace[-1]):
            continue
        if best is None or trace[-1] > best[1][-1]:
            best = (resp, trace)
    if best is None:
        raise NumericalError("all Gaussian mixture components collapsed")
    labels = np.argmax(best[0], axis=1)
    if np.unique(labels).size < K:
        warnings.warn(f"GMM found {np.unique(labels).size} distinct clusters, {K} requested",
                      DegenerateClusterWarning, stacklevel=3)
    return labels, best[1]


def gmm_cluster(points, K: int, seed: int = 0, restarts: int = 10) -> np.ndarray:
    """EM for a diagonal-covariance Gaussian mixture started from k-means;
    hard labels by maximum posterior, best restart by log-likelihood."""
    return _gmm_full(points, K, seed, restarts)[0]


def cluster_points(points, K: int, engine: Engine, seed: int = 0, restarts: int = 10) -> np.ndarray:
    if engine == "gmm":
        return gmm_cluster(points, K, seed, restarts)
    if engine == "kmeans":
        return kmeans(points, K, seed, restarts)
    raise DataError(f"unknown clustering engine {engine!r}")


# -- spectral methods ---------------------------------------------------------

def spectral_cluster(Y, K: int, embed_dim: int, engine: Engine = "gmm", seed: int = 0,
                     scale: bool = True, restarts: int = 10) -> ClusterAssignment:
    """Cluster the rows of the leading ``embed_dim`` eigenvectors of ``Y``.

    Eigenpairs are taken by eigenvalue magnitude; with ``scale=True`` each
    eigenvector is multiplied by its eigenvalue (rows of ``U Lambda``).
    """
    Y = as_matrix(Y)
    n = Y.shape[0]
    if K < 1 or K > n:
        raise DataError(f"K={K} out of range for n={n}")
    if not (1 <= embed_dim <= n):
        raise DataError(f"embed_dim={embed_dim} out of range [1, {n}]")
    spec = sym_eig_topk(Y, embed_dim)
    feats = spec.vectors * spec.values if scale else spec.vectors
    labels = cluster_points(feats, K, engine, seed, restarts)
    tag = "U*Lambda" if scale else "U"
    return ClusterAssignment(labels, K, f"spectral-{engine}", f"{tag} (dim {embed_dim})")


def bias_adjusted_matrix(sample: NetworkSample) -> np.ndarray:
    """``sum_l [A_l^2 - diag(A_l 1)]`` as a dense symmetric array."""
    S = sp.csr_matrix((sample.n, sample.n))
    deg = np.zeros(sample.n)
    for l in range(sample.L):
        A = sample.sparse(l)
        S = S + A @ A
        deg += np.asarray(A.sum(axis=1)).ravel()
    S = S.toarray()
    S[np.diag_indices(sample.n)] -= deg
    return 0.5 * (S + S.T)


def bias_adjusted_spectral(sample: NetworkSample, K: int, engine: Engine = "gmm", seed: int = 0,
                           scale: bool = False, restarts: int = 10) -> ClusterAssignment:
    """Spectral clustering on the debiased sum of squared adjacency matrices.

    By default the rows of the unscaled leading eigenvectors are clustered.
    """
    if K < 1 or K > sample.n:
        raise DataError(f"K={K} out of range for n={sample.n}")
    S = bias_adjusted_matrix(sample)
    spec = sym_eig_topk(S, K)
    feats = spec.vectors * spec.values if scale else spec.vectors
    labels = cluster_points(feats, K, engine, seed, restarts)
    return ClusterAssignment(labels, K, f"bias-adjusted-{engine}", "U" if not scale else "U*Lambda")


# -- evaluation ---------------------------------------------------------------

def _confusion(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    return np.bincount(a * K + b, minlength=K * K).reshape(K, K)


def align_labels(g_hat: Sequence[int], g: Sequence[int], K: int) -> AlignmentResult:
    """Relabel ``g_hat`` by the permutation minimizing Hamming distance to ``g``.

    Exhaustive over all permutations for ``K <= 8``; otherwise a maximum-weight
    matching on the confusion matrix, which attains the same optimum.
    """
    g_hat = np.asarray(g_hat, dtype=np.int64)
    g = np.asarray(g, dtype=np.int64)
    if g_hat.shape != g.shape:
        raise DataError("label vectors must have the same length")
    for name, v in (("g_hat", g_hat), ("g", g)):
        if v.size and (v.min() < 0 or v.max() >= K):
            raise DataError(f"{name} has labels outside [0, {K - 1}]")
    C = _confusion(g_hat, g, K)  # C[a, b] = #{i: g_hat_i = a, g_i = b}
    if K <= EXHAUSTIVE_MAX_K:
        perms = np.array(list(itertools.permutations(range(K))), dtype=np.int64)
        agree = C[np.arange(K)[None, :], perms].sum(axis=1)
        perm = perms[int(np.argmax(agree))]
    else:
        rows, cols = linear_sum_assignment(C, maximize=True)
        perm = np.empty(K, dtype=np.int64)
        perm[rows] = cols
    aligned = perm[g_hat]
    rate = float(np.mean(aligned != g)) if g.size else 0.0
    return AlignmentResult(perm, rate, aligned)


def adjusted_rand_index(a: Sequence[int], b: Sequence[int]) -> float:
    """Hubert-Arabie adjusted Rand index from the contingency table."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DataError("partitions must have the same length")
    n = a.size
    if n < 2:
        raise DataError("ARI needs at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    pairs = lambda x: x * (x - 1) / 2.0
    index = pairs(table).sum()
    rows = pairs(table.sum(axis=1)).sum()
    cols = pairs(table.sum(axis=0)).sum()
    total = comb(n, 2)
    expected = rows * cols / total
    maximum = 0.5 * (rows + cols)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))
