"""Stochastic blockmodel types and samplers.

Layers are stored as sorted upper-triangular coordinate lists (``i <= j``)
and expanded to dense matrices only on demand.  Community labels are
0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ._backend import block_counts
from .errors import DataError

__all__ = [
    "MembershipMatrix",
    "ConnectivityMatrix",
    "NetworkSample",
    "AveragedAdjacency",
    "layer_rng",
    "sample_mono",
    "sample_multi",
    "expected_adjacency",
    "average_layers",
    "as_matrix",
]


@dataclass(frozen=True)
class MembershipMatrix:
    """Node-to-community assignment.

    Parameters
    ----------
    labels : array_like of int
        Community index of every node, in ``0..K-1``.
    K : int, optional
        Number of communities.  Defaults to ``max(labels) + 1``.
    """

    labels: np.ndarray
    K: int = 0

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise DataError("labels must be a non-empty 1-D sequence")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise DataError("labels must be integers")
        labels = labels.astype(np.int64)
        K = int(self.K) if self.K else int(labels.max()) + 1
        if K < 1:
            raise DataError("K must be at least 1")
        if labels.min() < 0 or labels.max() >= K:
            raise DataError(f"labels must lie in [0, {K - 1}]")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def sizes(self) -> np.ndarray:
        """Community sizes ``n_k``; may contain zeros."""
        return np.bincount(self.labels, minlength=self.K)

    @property
    def Z(self) -> np.ndarray:
        """Dense one-hot ``n x K`` matrix."""
        Z = np.zeros((self.n, self.K))
        Z[np.arange(self.n), self.labels] = 1.0
        return Z

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "MembershipMatrix":
        """Contiguous blocks: the first ``sizes[0]`` nodes in community 0, etc."""
        sizes = [int(s) for s in sizes]
        if any(s < 0 for s in sizes):
            raise DataError("community sizes must be nonnegative")
        return cls(np.repeat(np.arange(len(sizes)), sizes), len(sizes))

    def permuted(self, perm: Sequence[int]) -> "MembershipMatrix":
        """Relabel: node with label ``k`` gets label ``perm[k]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return MembershipMatrix(perm[self.labels], self.K)


@dataclass(frozen=True)
class ConnectivityMatrix:
    """Symmetric ``K x K`` block connectivity matrix.

    ``probability=True`` additionally requires entries in ``[0, 1]``;
    diagnostic matrices (e.g. unclipped estimates) set it to False.
    """

    entries: np.ndarray
    rank_hint: Optional[int] = None
    probability: bool = True

    def __post_init__(self):
        B = np.array(self.entries, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise DataError(f"connectivity matrix must be square, got shape {B.shape}")
        if not np.all(np.isfinite(B)):
            raise DataError("connectivity matrix has non-finite entries")
        if not np.array_equal(B, B.T):
            raise DataError("connectivity matrix must be exactly symmetric")
        if self.probability and (B.min() < 0 or B.max() > 1):
            raise DataError("probability matrix entries must lie in [0, 1]")
        if self.rank_hint is not None:
            s = np.linalg.svd(B, compute_uv=False)
            r = int(np.sum(s > 1e-10 * s[0])) if s[0] > 0 else 0
            if r != self.rank_hint:
                raise DataError(f"rank_hint={self.rank_hint} but numerical rank is {r}")
        B.setflags(write=False)
        object.__setattr__(self, "entries", B)

    @property
    def K(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class AveragedAdjacency:
    """Entrywise mean of ``layer_count`` adjacency matrices."""

    matrix: np.ndarray
    layer_count: int = 1

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def as_matrix(Y) -> np.ndarray:
    """Unwrap an :class:`AveragedAdjacency`/:class:`ConnectivityMatrix` to an array."""
    if isinstance(Y, AveragedAdjacency):
        return Y.matrix
    if isinstance(Y, ConnectivityMatrix):
        return Y.entries
    return np.asarray(Y, dtype=float)


def _layer_from_dense(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.nonzero(np.triu(A))
    return rows.astype(np.int64), cols.astype(np.int64)


@dataclass(frozen=True)
class NetworkSample:
    """``L`` node-aligned undirected binary graphs on ``n`` nodes.

    Each layer is a pair ``(rows, cols)`` of int arrays listing the
    upper-triangular edges ``rows[e] <= cols[e]``, sorted lexicographically.
    """

    n: int
    layers: tuple
    rho: float = 1.0
    group_labels: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (0 < self.rho <= 1):
            raise DataError(f"rho must lie in (0, 1], got {self.rho}")
        layers = []
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, np.ndarray) and layer.ndim == 2:
                A = layer
                if A.shape != (self.n, self.n):
                    raise DataError(f"layer {idx} has shape {A.shape}, expected ({self.n}, {self.n})")
                if not np.array_equal(A, A.T):
                    raise DataError(f"layer {idx} is not symmetric")
                if not np.all((A == 0) | (A == 1)):
                    raise DataError(f"layer {idx} is not binary")
                rows, cols = _layer_from_dense(A)
            else:
                rows, cols = (np.asarray(a, dtype=np.int64) for a in layer)
                if rows.shape != cols.shape or rows.ndim != 1:
                    raise DataError(f"layer {idx}: malformed coordinate arrays")
                if rows.size:
                    if rows.min() < 0 or cols.max() >= self.n:
                        raise DataError(f"layer {idx}: node index out of range")
                    if np.any(rows > cols):
                        raise DataError(f"layer {idx}: edges must satisfy i <= j")
                    key = rows * self.n + cols
                    order = np.argsort(key, kind="stable")
                    if np.any(np.diff(key[order]) == 0):
                        raise DataError(f"layer {idx}: duplicate edges")
                    rows, cols = rows[order], cols[order]
            rows.setflags(write=False)
            cols.setflags(write=False)
            layers.append((rows, cols))
        if not layers:
            raise DataError("a sample needs at least one layer")
        object.__setattr__(self, "layers", tuple(layers))
        if self.group_labels is not None:
            g = np.asarray(self.group_labels, dtype=np.int64)
            if g.shape != (len(layers),):
                raise DataError("group_labels must have one entry per layer")
            object.__setattr__(self, "group_labels", g)

    @property
    def L(self) -> int:
        return len(self.layers)

    def dense(self, index: int) -> np.ndarray:
        rows, cols = self.layers[index]
        A = np.zeros((self.n, self.n))
        A[rows, cols] = 1.0
        A[cols, rows] = 1.0
        return A

    def sparse(self, index: int) -> sp.csr_matrix:
        rows, cols = self.layers[index]
        off = rows != cols
        r = np.concatenate([rows, cols[off]])
        c = np.concatenate([cols, rows[off]])
        return sp.csr_matrix((np.ones(r.size), (r, c)), shape=(self.n, self.n))

    def edge_count(self, index: int) -> int:
        return int(self.layers[index][0].size)

    def subset(self, indices: Sequence[int]) -> "NetworkSample":
        indices = list(indices)
        g = None if self.group_labels is None else self.group_labels[indices]
        return NetworkSample(self.n, tuple(self.layers[i] for i in indices), self.rho, g)

    def without_self_loops(self) -> "NetworkSample":
        layers = tuple((r[r != c], c[r != c]) for r, c in self.layers)
        return NetworkSample(self.n, layers, self.rho, self.group_labels)

    def layer_block_counts(self, membership: MembershipMatrix) -> np.ndarray:
        """Per-layer ``Z^T A Z`` as an ``(L, K, K)`` float array (cached)."""
        if membership.n != self.n:
            raise DataError(f"membership has {membership.n} nodes, sample has {self.n}")
        key = ("blocks", membership.K, membership.labels.tobytes())
        if key not in self._cache:
            out = np.empty((self.L, membership.K, membership.K))
            for l, (rows, cols) in enumerate(self.layers):
                out[l] = block_counts(rows, cols, membership.labels, membership.K)
            self._cache[key] = out
        return self._cache[key]

    def squared_norm_of_mean(self, indices: Optional[Sequence[int]] = None) -> float:
        """``||mean of selected layers||_F^2`` computed from edge multiplicities."""
        indices = range(self.L) if indices is None else list(indices)
        keys = [self.layers[i][0] * self.n + self.layers[i][1] for i in indices]
        if not keys:
            raise DataError("empty layer subset")
        flat = np.concatenate(keys)
        if flat.size == 0:
            return 0.0
        uniq, counts = np.unique(flat, return_counts=True)
        diag = (uniq // self.n) == (uniq % self.n)
        c2 = counts.astype(float) ** 2
        return float((2.0 * c2[~diag].sum() + c2[diag].sum()) / len(keys) ** 2)


def layer_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for layer ``index`` of a sample seeded by ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def _check_inputs(B, Z: MembershipMatrix, rho: float) -> np.ndarray:
    B = as_matrix(B)
    if B.shape != (Z.K, Z.K):
        raise DataError(f"B has shape {B.shape} but membership has K={Z.K}")
    if not (0 < rho <= 1):
        raise DataError(f"rho must lie in (0, 1], got {rho}")
    if B.min() < 0 or B.max() > 1:
        raise DataError("B must be a probability matrix")
    return B


def _sample_layer(P_upper: np.ndarray, iu: np.ndarray, ju: np.ndarray, rng) -> tuple:
    hit = rng.random(P_upper.size) < P_upper
    return iu[hit], ju[hit]


def _upper_probabilities(B: np.ndarray, Z: MembershipMatrix, rho: float, self_loops: bool):
    iu, ju = np.triu_indices(Z.n, k=0 if self_loops else 1)
    P = rho * B[Z.labels[iu], Z.labels[ju]]
    return P, iu.astype(np.int64), ju.astype(np.int64)


def sample_mono(B, Z: MembershipMatrix, rho: float, L: int, seed: int,
                self_loops: bool = True) -> NetworkSample:
    """Draw ``L`` i.i.d. SBM layers with edge probabilities ``rho * B[g_i, g_j]``.

    The diagonal is sampled too unless ``self_loops=False``.  Layer ``l`` uses
    the stream :func:`layer_rng(seed, l) <layer_rng>`, so layers do not depend
    on generation order.
    """
    B = _check_inputs(B, Z, rho)
    if L < 1:
        raise DataError("L must be at least 1")
    P, iu, ju = _upper_probabilities(B, Z, rho, self_loops)
    layers = tuple(_sample_layer(P, iu, ju, layer_rng(seed, l)) for l in range(L))
    return NetworkSample(Z.n, layers, rho)


def sample_multi(Bs: Sequence, Z: MembershipMatrix, rho: float,
                 layers_per_group: Sequence[int], seed: int,
                 self_loops: bool = True) -> NetworkSample:
    """Multilayer SBM: group ``g`` contributes ``layers_per_group[g]`` layers drawn from ``Bs[g]``.

    Layers are ordered group by group and ``group_labels`` records the truth.
    """
    Bs = [as_matrix(B) for B in Bs]
    if not Bs:
        raise DataError("need at least one connectivity matrix")
    if len({B.shape for B in Bs}) != 1:
        raise DataError("all connectivity matrices must share K")
    if len(layers_per_group) != len(Bs):
        raise DataError("layers_per_group must have one entry per group")
    layers, groups = [], []
    index = 0
    for g, (B, count) in enumerate(zip(Bs, layers_per_group)):
        B = _check_inputs(B, Z, rho)
        P, iu, ju = _upper_probabilities(B, Z, rho, self_loops)
        for _ in range(int(count)):
            layers.append(_sample_layer(P, iu, ju, layer_rng(seed, index)))
            groups.append(g)
            index += 1
    return NetworkSample(Z.n, tuple(layers), rho, np.asarray(groups))


def expected_adjacency(B, Z: MembershipMatrix, rho: float) -> np.ndarray:
    """``rho * Z B Z^T``."""
    B = as_matrix(B)
    if B.shape != (Z.K, Z.K):
        raise DataError(f"B has shape {B.shape} but membership has K={Z.K}")
    return rho * B[np.ix_(Z.labels, Z.labels)]


def average_layers(sample: NetworkSample, subset: Optional[Sequence[int]] = None) -> AveragedAdjacency:
    """Entrywise mean of the selected layers (all layers by default)."""
    indices = list(range(sample.L)) if subset is None else [int(i) for i in subset]
    if not indices:
        raise DataError("cannot average an empty layer subset")
    n = sample.n
    flat = np.concatenate([sample.layers[i][0] * n + sample.layers[i][1] for i in indices])
    C = np.bincount(flat, minlength=n * n).reshape(n, n).astype(float)
    M = C + C.T
    M[np.diag_indices(n)] = np.diag(C)
    M /= len(indices)
    return AveragedAdjacency(M, len(indices))
