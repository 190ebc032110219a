"""Penalty grids and cross-validation over layers."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .admm import AdmmConfig, BlockProblem, SolveResult, lambda_max, path_blocks, solve_blocks
from .errors import DataError
from .model import MembershipMatrix, NetworkSample

__all__ = [
    "CvPlan",
    "CvReport",
    "make_lambda_grid",
    "mfold_plan",
    "repeated_splits",
    "cross_validate",
    "subset_problem",
    "MAX_REPEATED_SPLITS",
]

MAX_REPEATED_SPLITS = 64


@dataclass(frozen=True)
class CvPlan:
    """Train/validation splits of the layer indices ``0..L-1``."""

    mode: Literal["mfold", "repeated"]
    L: int
    splits: tuple
    M: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        for train, val in self.splits:
            if len(train) == 0 or len(val) == 0:
                raise DataError("every split needs nonempty train and validation sets")
            if set(train) & set(val):
                raise DataError("train and validation sets overlap")
            if max(max(train), max(val)) >= self.L or min(min(train), min(val)) < 0:
                raise DataError("split index out of range")

    @property
    def folds(self) -> list[np.ndarray]:
        """Validation sets; for ``mfold`` these partition the layers."""
        return [val for _, val in self.splits]


@dataclass
class CvReport:
    lambdas: np.ndarray
    split_losses: np.ndarray  # (n_splits, n_lambdas)
    selected_lambda: float
    selected_index: int
    d_hat: int
    refit: Optional[SolveResult] = None
    split_d_hat: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def total_loss(self) -> np.ndarray:
        return self.split_losses.sum(axis=0)

    def to_dict(self) -> dict:
        out = {
            "format_version": 1,
            "lambdas": [float(x) for x in self.lambdas],
            "split_losses": [[float(x) for x in row] for row in self.split_losses],
            "total_loss": [float(x) for x in self.total_loss],
            "selected_lambda": float(self.selected_lambda),
            "d_hat": int(self.d_hat),
            "split_d_hat": [[int(x) for x in row] for row in np.atleast_2d(self.split_d_hat)],
        }
        if self.refit is not None:
            out["B_hat"] = self.refit.B_hat.entries.tolist()
        return out


def make_lambda_grid(Y, Z_hat: MembershipMatrix | None = None, count: int = 50,
                     floor_ratio: float = 1e-4, scaling: str = "raw") -> np.ndarray:
    """Geometric grid from ``floor_ratio * lambda_max`` up to ``lambda_max``, ascending.

    ``Y`` may be an averaged adjacency (with ``Z_hat``) or a :class:`BlockProblem`.
    """
    if count < 2:
        raise DataError("grid needs at least 2 points")
    if not (0 < floor_ratio < 1):
        raise DataError("floor_ratio must lie in (0, 1)")
    lmax = lambda_max(Y, Z_hat, scaling)
    if lmax <= 0:
        raise DataError("lambda_max is zero (all-zero input); no grid to build")
    grid = np.geomspace(floor_ratio * lmax, lmax, count)
    grid[-1] = lmax
    return grid


def mfold_plan(L: int, M: int, seed: int = 0) -> CvPlan:
    """Random partition of the layers into ``M`` folds whose sizes differ by at most one.

    The first ``L mod M`` folds get the extra layers.
    """
    if M < 2:
        raise DataError("M-fold CV needs M >= 2")
    if L < M:
        raise DataError(f"cannot split {L} layers into {M} folds")
    perm = np.random.default_rng(seed).permutation(L)
    base, extra = divmod(L, M)
    folds, start = [], 0
    for m in range(M):
        size = base + (1 if m < extra else 0)
        folds.append(np.sort(perm[start:start + size]))
        start += size
    everything = np.arange(L)
    splits = tuple((np.setdiff1d(everything, f), f) for f in folds)
    return CvPlan("mfold", L, splits, M=M, seed=seed)


def repeated_splits(L: int, train_size: int, seed: int = 0,
                    max_splits: int = MAX_REPEATED_SPLITS) -> CvPlan:
    """All ``C(L, train_size)`` train/validation partitions, or ``max_splits``
    distinct ones drawn at random when there are more."""
    if not (1 <= train_size < L):
        raise DataError(f"train_size must lie in [1, {L - 1}]")
    everything = np.arange(L)
    total = math.comb(L, train_size)
    if total <= max_splits:
        combos = [np.array(c) for c in itertools.combinations(range(L), train_size)]
    else:
        rng = np.random.default_rng(seed)
        seen, combos = set(), []
        while len(combos) < max_splits:
            c = tuple(sorted(rng.choice(L, train_size, replace=False).tolist()))
            if c not in seen:
                seen.add(c)
                combos.append(np.array(c))
    splits = tuple((c, np.setdiff1d(everything, c)) for c in combos)
    return CvPlan("repeated", L, splits, seed=seed)


def subset_problem(sample: NetworkSample, Z_hat: MembershipMatrix,
                   indices: Sequence[int]) -> BlockProblem:
    """Block statistics of the mean of the selected layers."""
    indices = np.asarray(indices, dtype=int)
    blocks = sample.layer_block_counts(Z_hat)
    R = blocks[indices].sum(axis=0) / indices.size
    return BlockProblem.from_membership(R, Z_hat.sizes, sample.squared_norm_of_mean(indices))


def _validation_loss(val: BlockProblem, W: np.ndarray) -> float:
    return val.loss(W)


def cross_validate(sample: NetworkSample, Z_hat: MembershipMatrix, plan: CvPlan,
                   lambdas: Sequence[float], cfg: AdmmConfig, refit: bool = True) -> CvReport:
    """Score each penalty by held-out squared error summed over splits.

    For each split the estimator is fitted on the mean of the training layers
    along the (warm-started) grid and scored by
    ``||A_val - Z B_rho Z^T||_F^2``.  The penalty with the smallest total
    loss wins; exact ties go to the larger penalty.  With ``refit`` the
    winner is refitted on all layers and its rank reported.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size == 0:
        raise DataError("empty lambda grid")
    if plan.L != sample.L:
        raise DataError(f"plan covers {plan.L} layers, sample has {sample.L}")
    if plan.mode == "mfold" and sample.L < (plan.M or 2):
        raise DataError("fewer layers than folds")
    losses = np.zeros((len(plan.splits), lambdas.size))
    ranks = np.zeros((len(plan.splits), lambdas.size), dtype=int)
    for s, (train, val) in enumerate(plan.splits):
        fit = subset_problem(sample, Z_hat, train)
        held = subset_problem(sample, Z_hat, val)
        for j, res in enumerate(path_blocks(fit, lambdas, cfg, sample.rho)):
            losses[s, j] = _validation_loss(held, res.state.V)
            ranks[s, j] = res.d_hat
    total = losses.sum(axis=0)
    best = total.min()
    index = int(np.flatnonzero(total == best).max())
    lam = float(lambdas[index])
    result = None
    d_hat = -1
    if refit:
        result = solve_blocks(subset_problem(sample, Z_hat, range(sample.L)), cfg.with_lambda(lam), sample.rho)
        d_hat = result.d_hat
    return CvReport(lambdas, losses, lam, index, d_hat, result, ranks)
