"""Multilayer estimation: group layers by connectivity, then estimate each group.

Also houses the membership re-estimation loop for single-pattern samples.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .admm import AdmmConfig, SolveResult, solve_blocks
from .baselines import avg_lowrank, block_average
from .clustering import (
    ClusterAssignment,
    align_labels,
    bias_adjusted_spectral,
    cluster_points,
    spectral_cluster,
)
from .errors import DataError
from .model import MembershipMatrix, NetworkSample, average_layers
from .numerics import svd_full
from .tuning import CvReport, cross_validate, make_lambda_grid, mfold_plan, subset_problem

__all__ = [
    "LayerGrouping",
    "GroupEstimate",
    "MultiResult",
    "ReestimateResult",
    "layer_features",
    "cluster_layers",
    "estimate_l_tilde",
    "multisbm_estimate",
    "reestimate_pipeline",
    "between_layer_error",
    "cv_estimate",
]

ZERO_GAP = 1e-10


@dataclass(frozen=True)
class LayerGrouping:
    L: int
    L_tilde: int
    groups: np.ndarray  # group index of every layer

    def __post_init__(self):
        g = np.asarray(self.groups, dtype=np.int64)
        object.__setattr__(self, "groups", g)
        if g.shape != (self.L,):
            raise DataError(f"expected {self.L} group labels, got {g.shape}")
        if g.size and (g.min() < 0 or g.max() >= self.L_tilde):
            raise DataError(f"group labels must lie in [0, {self.L_tilde - 1}]")
        empty = np.flatnonzero(np.bincount(g, minlength=self.L_tilde) == 0)
        if empty.size:
            raise DataError(f"layer groups {empty.tolist()} are empty; L_tilde={self.L_tilde} may be too large")

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.groups == group)


@dataclass
class GroupEstimate:
    layers: np.ndarray
    result: SolveResult
    lam: float
    flags: tuple = ()
    cv: Optional[CvReport] = None


@dataclass
class MultiResult:
    grouping: LayerGrouping
    estimates: list
    membership: MembershipMatrix
    between_layer_error: Optional[float] = None
    scree: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {
            "format_version": 1,
            "L": self.grouping.L,
            "L_tilde": self.grouping.L_tilde,
            "layer_groups": self.grouping.groups.tolist(),
            "membership": self.membership.labels.tolist(),
            "groups": [
                {
                    "layers": e.layers.tolist(),
                    "lambda": float(e.lam),
                    "d_hat": int(e.result.d_hat),
                    "flags": list(e.flags),
                    "converged": bool(e.result.converged),
                    "B_hat": e.result.B_hat.entries.tolist(),
                }
                for e in self.estimates
            ],
        }
        if self.between_layer_error is not None:
            out["between_layer_error"] = float(self.between_layer_error)
        if self.scree is not None:
            out["scree"] = [float(s) for s in self.scree]
        return out


@dataclass
class ReestimateResult:
    initial: ClusterAssignment
    final: ClusterAssignment
    d_hat: int
    estimate: SolveResult
    B_hat: np.ndarray
    reclustered: bool
    cv: Optional[CvReport] = field(default=None, repr=False)


# -- layer features and grouping ----------------------------------------------

def layer_features(sample: NetworkSample, Z_hat: Optional[MembershipMatrix] = None, rho: Optional[float] = None,
                   level: Literal["per-layer-B", "per-layer-A"] = "per-layer-B") -> np.ndarray:
    """One row per layer: the upper triangle (diagonal included) of either the
    layer's blockwise-average estimate or its adjacency matrix."""
    if level == "per-layer-B":
        if Z_hat is None:
            raise DataError("per-layer-B features need a membership")
        rho = sample.rho if rho is None else rho
        sizes = Z_hat.sizes.astype(float)
        if np.any(sizes == 0):
            raise DataError(f"estimated communities {np.flatnonzero(sizes == 0).tolist()} are empty")
        blocks = sample.layer_block_counts(Z_hat)
        iu = np.triu_indices(Z_hat.K)
        return np.stack([block_average(b, sizes, rho)[iu] for b in blocks])
    if level == "per-layer-A":
        iu = np.triu_indices(sample.n)
        return np.stack([sample.dense(l)[iu] for l in range(sample.L)]).astype(float)
    raise DataError(f"unknown feature level {level!r}")


def cluster_layers(features, L_tilde: int, engine: str = "gmm", seed: int = 0,
                   restarts: int = 10) -> LayerGrouping:
    """Group feature rows into ``L_tilde`` clusters.

    Rows are put in lexicographic order before clustering, so the grouping
    does not depend on the order in which layers were supplied.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim != 2:
        raise DataError("features must be a 2-D array")
    L = F.shape[0]
    if not (1 <= L_tilde <= L):
        raise DataError(f"L_tilde={L_tilde} out of range [1, {L}]")
    if L_tilde == 1:
        return LayerGrouping(L, 1, np.zeros(L, dtype=int))
    order = np.lexsort(F.T[::-1])
    labels = np.empty(L, dtype=int)
    labels[order] = cluster_points(F[order], L_tilde, engine, seed, restarts)
    # relabel by first appearance in canonical order for stable group ids
    _, first = np.unique(labels[order], return_index=True)
    remap = np.empty(L_tilde, dtype=int)
    present = labels[order][np.sort(first)]
    remap[present] = np.arange(present.size)
    if present.size < L_tilde:
        raise DataError(f"clustering produced {present.size} nonempty groups; L_tilde={L_tilde} is too large")
    return LayerGrouping(L, L_tilde, remap[labels])


def estimate_l_tilde(features, max_candidates: int = 10) -> tuple[int, np.ndarray]:
    """Elbow of the scree plot: the ``j`` maximizing ``sigma_j / sigma_{j+1}``.

    ``max_candidates`` is capped at the smaller dimension of ``features``.
    A ``sigma_{j+1}`` below ``1e-10 * sigma_1`` counts as an infinite ratio, and
    the first such ``j`` is returned.  The singular values are returned too.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim != 2 or F.size == 0:
        raise DataError("features must be a nonempty 2-D array")
    if max_candidates < 1:
        raise DataError("max_candidates must be at least 1")
    max_candidates = min(max_candidates, *F.shape)
    s = svd_full(F).values
    if s[0] == 0:
        raise DataError("all-zero feature matrix has no scree elbow")
    last = min(max_candidates, s.size - 1)
    if last < 1:
        return 1, s
    nxt = s[1:last + 1]
    tiny = nxt <= ZERO_GAP * s[0]
    if tiny.any():
        return int(np.argmax(tiny)) + 1, s
    return int(np.argmax(s[:last] / nxt)) + 1, s


def between_layer_error(grouping: LayerGrouping, truth: Sequence[int]) -> float:
    """Fraction of layers in the wrong group under the best group relabeling."""
    truth = np.asarray(truth, dtype=np.int64)
    if truth.shape != (grouping.L,):
        raise DataError(f"truth has {truth.size} entries for {grouping.L} layers")
    if np.unique(truth).size != grouping.L_tilde or truth.max() >= grouping.L_tilde:
        raise DataError(f"truth has {np.unique(truth).size} groups, grouping has {grouping.L_tilde}")
    return align_labels(grouping.groups, truth, grouping.L_tilde).misclustering_rate


# -- estimation -----------------------------------------------------------------

def _canonical_layers(sample: NetworkSample, indices: np.ndarray) -> np.ndarray:
    """Order layers by a digest of their edge lists so fold assignment follows content."""
    def key(l):
        r, c = sample.layers[l]
        h = hashlib.sha1(np.ascontiguousarray(r, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(c, dtype=np.int64).tobytes())
        return h.hexdigest()
    return np.array(sorted(indices.tolist(), key=lambda l: (key(l), l)), dtype=np.int64)


def cv_estimate(sample: NetworkSample, Z_hat: MembershipMatrix, cfg: AdmmConfig,
                lambdas=None, folds: int = 5, seed: int = 0,
                grid_size: int = 50, floor_ratio: float = 1e-4) -> CvReport:
    """Cross-validated fit on all layers of ``sample`` with ``min(folds, L)`` folds."""
    if sample.L < 2:
        raise DataError("cross-validation needs at least two layers")
    if lambdas is None:
        lambdas = make_lambda_grid(subset_problem(sample, Z_hat, range(sample.L)), None,
                                   grid_size, floor_ratio, cfg.scaling)
    plan = mfold_plan(sample.L, min(folds, sample.L), seed)
    return cross_validate(sample, Z_hat, plan, lambdas, cfg)


def multisbm_estimate(sample: NetworkSample, K: int, L_tilde: Optional[int] = None,
                      lambdas=None, cfg: Optional[AdmmConfig] = None, folds: int = 5,
                      lam: Optional[float] = None, engine: str = "gmm",
                      membership_engine: str = "gmm", seed: int = 0,
                      Z_hat: Optional[MembershipMatrix] = None,
                      max_candidates: int = 10,
                      truth_groups: Optional[Sequence[int]] = None) -> MultiResult:
    """Two-stage estimate for samples whose layers follow several connectivity patterns.

    1. Memberships by bias-adjusted spectral clustering (skipped if ``Z_hat`` is given).
    2. Layers grouped by their blockwise-average estimates; ``L_tilde`` from the
       scree elbow when not supplied.
    3. Each group is fitted on its mean adjacency, with cross-validated
       ``lambda`` unless ``lam`` is fixed.  Groups with one layer cannot be
       cross-validated and get the median of the other groups' selections,
       flagged ``no-cv``.
    """
    if sample.L < 2:
        raise DataError("multilayer estimation needs at least two layers")
    cfg = cfg or AdmmConfig()
    if Z_hat is None:
        Z_hat = bias_adjusted_spectral(sample, K, membership_engine, seed).membership
    elif Z_hat.K != K or Z_hat.n != sample.n:
        raise DataError("membership does not match K or n")
    feats = layer_features(sample, Z_hat)
    scree = None
    if L_tilde is None:
        L_tilde, scree = estimate_l_tilde(feats, min(max_candidates, *feats.shape))
    grouping = cluster_layers(feats, L_tilde, engine, seed)

    estimates: list[Optional[GroupEstimate]] = [None] * L_tilde
    pending = []
    for g in range(L_tilde):
        members = grouping.members(g)
        sub = sample.subset(_canonical_layers(sample, members))
        if lam is not None:
            res = solve_blocks(subset_problem(sub, Z_hat, range(sub.L)), cfg.with_lambda(lam), sub.rho)
            estimates[g] = GroupEstimate(members, res, float(lam), ("fixed-lambda",))
        elif sub.L >= 2:
            report = cv_estimate(sub, Z_hat, cfg, lambdas, folds, seed)
            estimates[g] = GroupEstimate(members, report.refit, report.selected_lambda, (), report)
        else:
            pending.append((g, members, sub))
    if pending:
        chosen = [e.lam for e in estimates if e is not None]
        if not chosen:
            raise DataError("no layer group has two or more layers; supply a fixed lambda")
        fallback = float(np.median(chosen))
        for g, members, sub in pending:
            res = solve_blocks(subset_problem(sub, Z_hat, range(sub.L)), cfg.with_lambda(fallback), sub.rho)
            estimates[g] = GroupEstimate(members, res, fallback, ("no-cv",))
    r_bl = None if truth_groups is None else between_layer_error(grouping, truth_groups)
    return MultiResult(grouping, estimates, Z_hat, r_bl, scree)


def reestimate_pipeline(sample: NetworkSample, K: int, lambdas=None, cfg: Optional[AdmmConfig] = None,
                        seed: int = 0, folds: int = 5, engine: str = "kmeans",
                        scale: bool = True) -> ReestimateResult:
    """Cluster, estimate the rank, re-cluster at that rank, then truncate.

    1. Spectral clustering of the mean adjacency with embedding dimension ``K``
       (rows of ``U Lambda`` by default; unscaled eigenvectors give the weak
       trailing directions as much weight as the leading ones).
    2. Cross-validated penalized fit given that membership gives ``d_hat``.
    3. If ``d_hat != K``, cluster again with embedding dimension ``d_hat``.
    4. Rank-``d_hat`` truncation of the blockwise average under the final membership.

    ``d_hat = 0`` (everything shrunk away) keeps the step-1 membership and a zero estimate.
    """
    cfg = cfg or AdmmConfig()
    Ybar = average_layers(sample)
    initial = spectral_cluster(Ybar, K, K, engine, seed, scale=scale)
    report = cv_estimate(sample, initial.membership, cfg, lambdas, folds, seed)
    d_hat = int(report.d_hat)
    final = initial
    reclustered = False
    if 1 <= d_hat != K:
        final = spectral_cluster(Ybar, K, d_hat, engine, seed, scale=scale)
        reclustered = True
    if d_hat >= 1:
        B_hat = avg_lowrank(Ybar, final.membership, sample.rho, min(d_hat, K)).B_hat.entries
    else:
        B_hat = np.zeros((K, K))
    return ReestimateResult(initial, final, d_hat, report.refit, B_hat, reclustered, report)
