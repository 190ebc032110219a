"""Monte-Carlo harness for the simulation studies.

A run is described by an :class:`ExperimentConfig`.  Replicate ``r`` uses
seed ``seed + r`` for everything it draws, so any replicate can be rerun on
its own, and the report does not depend on how replicates are scheduled.
"""
from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from .admm import DEFAULT_EPSILON, AdmmConfig
from .baselines import (
    averaging_estimator,
    avg_lowrank,
    cv_avg_lowrank,
    truncation_errors,
)
from .clustering import adjusted_rand_index, align_labels, spectral_cluster
from .errors import DataError, NetblockError
from .model import MembershipMatrix, average_layers, sample_mono, sample_multi
from .multilayer import cv_estimate, multisbm_estimate, reestimate_pipeline
from .tuning import mfold_plan

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "TruncationCurve",
    "PRESETS",
    "preset",
    "resolve_sizes",
    "build_B",
    "run_experiment",
    "run_replicate",
    "sweep_truncation",
    "aggregate",
    "thread_count",
    "multi_suite",
]

SCENARIOS = ("mono-true-z", "mono-est-z", "reestimate", "multi")
PAPER_K10_FRACTIONS = (0.15, 0.15, 0.1, 0.1, 0.1, 0.08, 0.08, 0.08, 0.08, 0.08)
MULTI_FRACTIONS = (0.25, 0.25, 0.5)
B_STREAM = 2 ** 32 - 1  # SeedSequence word reserved for drawing B (layer streams use 0..L-1)


def multi_suite() -> list[np.ndarray]:
    """The four three-community connectivity matrices of ranks 3, 3, 2 and 1."""
    h = math.sqrt(2.0) / 2.0
    U = np.array([[0.5, 0.5, -h], [0.5, 0.5, h], [h, -h, 0.0]])
    out = []
    for diag in ((1.2, 0.6, -0.7), (1.2, 0.6, 0.7), (1.7, 0.0, -0.6)):
        B = (U * np.array(diag)) @ U.T
        out.append(0.5 * (B + B.T))
    u = 0.8 ** np.arange(1, 4)
    out.append(np.outer(u, u))
    return out


def _rho_value(rho: Union[float, str], n: int) -> float:
    if isinstance(rho, str):
        if rho == "log":
            return math.log(n) / n
        if rho == "sqrt-log":
            return math.sqrt(math.log(n)) / n
        raise DataError(f"unknown rho spec {rho!r}; use a number, 'log' or 'sqrt-log'")
    return float(rho)


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation study.

    ``B`` is a dict with ``kind`` one of ``explicit`` (``matrix``),
    ``rank1-geometric`` (``p``: ``u = (p, p^2, ..., p^K)``), ``uniform-rank-r``
    (``r``, ``low``, ``high``: average of ``r`` outer products of uniform
    vectors, redrawn each replicate) or ``multi-suite``.  ``sizes`` is a list
    of community sizes, or one of ``paper-k10``, ``multi``, ``equal``.
    ``rho`` may be a number, ``"log"`` (log n / n) or ``"sqrt-log"``.
    """

    scenario: str = "mono-true-z"
    n: int = 1000
    K: int = 10
    d: int = 1
    L: int = 100
    rho: Union[float, str] = 0.1
    replicates: int = 20
    seed: int = 0
    B: dict = field(default_factory=lambda: {"kind": "rank1-geometric", "p": 0.9})
    sizes: Union[str, list] = "paper-k10"
    layers_per_group: Optional[list] = None
    L_tilde: Optional[int] = None
    grid_size: int = 50
    floor_ratio: float = 1e-4
    folds: int = 5
    engine: str = "gmm"
    scaling: str = "raw"
    self_loops: bool = True
    rho1: Optional[float] = None
    epsilon: float = DEFAULT_EPSILON
    max_iters: int = 10000

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise DataError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        for name in ("n", "K", "L", "replicates", "grid_size", "folds"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be positive")
        if not (0 <= self.d <= self.K):
            raise DataError("d must lie in [0, K]")
        rho = _rho_value(self.rho, self.n)
        if not (0 < rho <= 1):
            raise DataError(f"rho resolves to {rho}, outside (0, 1]")
        if self.scenario == "multi" and not self.layers_per_group:
            raise DataError("the multi scenario needs layers_per_group")
        resolve_sizes(self.sizes, self.n, self.K)

    @property
    def rho_value(self) -> float:
        return _rho_value(self.rho, self.n)

    @property
    def admm(self) -> AdmmConfig:
        return AdmmConfig(rho1=self.rho1, epsilon=self.epsilon, max_iters=self.max_iters, scaling=self.scaling)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["format_version"] = 1
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("format_version", 1)
        if version != 1:
            raise DataError(f"unsupported config format_version {version}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DataError(f"unknown config fields: {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def resolve_sizes(spec, n: int, K: int) -> list[int]:
    """Community sizes from a named spec or an explicit list."""
    if isinstance(spec, str):
        if spec == "paper-k10":
            fractions = PAPER_K10_FRACTIONS
        elif spec == "multi":
            fractions = MULTI_FRACTIONS
        elif spec == "equal":
            base, extra = divmod(n, K)
            return [base + (1 if k < extra else 0) for k in range(K)]
        else:
            raise DataError(f"unknown sizes spec {spec!r}")
        if len(fractions) != K:
            raise DataError(f"sizes spec {spec!r} has {len(fractions)} communities, K={K}")
        sizes = [int(round(f * n)) for f in fractions]
        sizes[-1] += n - sum(sizes)
    else:
        sizes = [int(s) for s in spec]
    if len(sizes) != K or sum(sizes) != n or min(sizes) < 1:
        raise DataError(f"community sizes {sizes} do not give K={K} nonempty communities summing to n={n}")
    return sizes


def build_B(config: ExperimentConfig, rng: np.random.Generator) -> list[np.ndarray]:
    """Connectivity matrices for one replicate (one per layer group)."""
    spec = config.B
    kind = spec.get("kind")
    K = config.K
    if kind == "explicit":
        mats = spec["matrix"]
        mats = [mats] if np.ndim(mats) == 2 else mats
        out = [np.asarray(M, dtype=float) for M in mats]
    elif kind == "rank1-geometric":
        u = float(spec.get("p", 0.9)) ** np.arange(1, K + 1)
        out = [np.outer(u, u)]
    elif kind == "uniform-rank-r":
        r = int(spec.get("r", config.d))
        U = rng.uniform(float(spec.get("low", 0.2)), float(spec.get("high", 0.9)), size=(r, K))
        out = [U.T @ U / r]
    elif kind == "multi-suite":
        if K != 3:
            raise DataError("the multi-suite connectivity matrices have K=3")
        out = multi_suite()
    else:
        raise DataError(f"unknown B kind {kind!r}")
    for B in out:
        if B.shape != (K, K):
            raise DataError(f"B has shape {B.shape}, expected ({K}, {K})")
    return out


# -- per-replicate work ------------------------------------------------------

def _aligned_B(B_hat: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Express ``B_hat`` (estimated labels) in the true labeling: ``out[perm[a], perm[b]] = B_hat[a, b]``."""
    out = np.empty_like(B_hat)
    out[np.ix_(perm, perm)] = B_hat
    return out


def _err(B_hat, B) -> float:
    return float(np.linalg.norm(np.asarray(B_hat) - B))


def _mono_methods(sample, Z_hat, B, config, seed, row, prefix=""):
    cfg = config.admm
    report = cv_estimate(sample, Z_hat, cfg, None, config.folds, seed, config.grid_size, config.floor_ratio)
    Ybar = average_layers(sample)
    avg = averaging_estimator(Ybar, Z_hat, sample.rho)
    lr = cv_avg_lowrank(sample, Z_hat, mfold_plan(sample.L, min(config.folds, sample.L), seed))
    row.update({
        "err_our": _err(report.refit.B_hat.entries, B),
        "err_avg": _err(avg.B_hat.entries, B),
        "err_avglr": _err(lr.result.B_hat.entries, B),
        "d_our": int(report.d_hat),
        "d_avg": int(avg.d_hat),
        "d_avglr": int(lr.selected_rank),
        "lambda": float(report.selected_lambda),
    })
    if config.d >= 1:
        row["err_avglr_true_d"] = _err(avg_lowrank(Ybar, Z_hat, sample.rho, config.d).B_hat.entries, B)
        # spectral-embedding baselines at ranks K and d, from one eigendecomposition
        rel = truncation_errors(Ybar, Z_hat, sample.rho, B, [config.K, config.d])
        row["err_spec_K"], row["err_spec_d"] = (float(x) for x in rel * np.linalg.norm(B))
    return row


def run_replicate(config: ExperimentConfig, r: int) -> dict:
    """All metrics for replicate ``r``; failures are recorded, not raised."""
    seed = config.seed + r
    row: dict[str, Any] = {"replicate": r, "seed": seed, "status": "ok"}
    try:
        rng = np.random.default_rng(np.random.SeedSequence([seed, B_STREAM]))
        Bs = build_B(config, rng)
        Z = MembershipMatrix.from_sizes(resolve_sizes(config.sizes, config.n, config.K))
        rho = config.rho_value
        if config.scenario == "multi":
            _run_multi(config, Bs, Z, rho, seed, row)
        else:
            B = Bs[0]
            sample = sample_mono(B, Z, rho, config.L, seed, config.self_loops)
            if config.scenario == "mono-true-z":
                _mono_methods(sample, Z, B, config, seed, row)
            elif config.scenario == "mono-est-z":
                found = spectral_cluster(average_layers(sample), config.K, config.K, config.engine, seed)
                al = align_labels(found.labels, Z.labels, config.K)
                row["misclustering"] = al.misclustering_rate
                row["ari"] = adjusted_rand_index(found.labels, Z.labels)
                _mono_methods(sample, MembershipMatrix(al.aligned, config.K), B, config, seed, row)
            else:
                _run_reestimate(config, sample, B, Z, seed, row)
    except (NetblockError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        row = {"replicate": r, "seed": seed, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    return row


def _run_reestimate(config, sample, B, Z, seed, row):
    res = reestimate_pipeline(sample, config.K, cfg=config.admm, seed=seed, folds=config.folds)
    first = align_labels(res.initial.labels, Z.labels, config.K)
    last = align_labels(res.final.labels, Z.labels, config.K)
    row.update({
        "misclustering_initial": first.misclustering_rate,
        "misclustering_final": last.misclustering_rate,
        "improved": bool(last.misclustering_rate < first.misclustering_rate),
        "d_our": int(res.d_hat),
        "reclustered": bool(res.reclustered),
        "err_initial": _err(_aligned_B(res.estimate.B_hat.entries, first.permutation), B),
        "err_final": _err(_aligned_B(res.B_hat, last.permutation), B),
        "lambda": float(res.cv.selected_lambda),
    })


def _run_multi(config, Bs, Z, rho, seed, row):
    counts = list(config.layers_per_group)
    if len(counts) != len(Bs):
        raise DataError(f"{len(counts)} group sizes for {len(Bs)} connectivity matrices")
    sample = sample_multi(Bs, Z, rho, counts, seed, config.self_loops)
    L_tilde = config.L_tilde if config.L_tilde is not None else len(Bs)
    res = multisbm_estimate(sample, config.K, L_tilde, cfg=config.admm, folds=config.folds,
                            engine=config.engine, membership_engine=config.engine, seed=seed,
                            truth_groups=sample.group_labels)
    Z_hat = res.membership
    al = align_labels(Z_hat.labels, Z.labels, config.K)
    row["ari"] = adjusted_rand_index(Z_hat.labels, Z.labels)
    row["misclustering"] = al.misclustering_rate
    row["between_layer_error"] = res.between_layer_error
    group_map = align_labels(res.grouping.groups, sample.group_labels, L_tilde).permutation
    for g, est in enumerate(res.estimates):
        truth = int(group_map[g])
        B = Bs[truth]
        sub = sample.subset(est.layers)
        Ybar = average_layers(sub)
        avg = averaging_estimator(Ybar, Z_hat, rho)
        tag = f"_g{truth + 1}"
        row["err_our" + tag] = _err(_aligned_B(est.result.B_hat.entries, al.permutation), B)
        row["err_avg" + tag] = _err(_aligned_B(avg.B_hat.entries, al.permutation), B)
        row["d_our" + tag] = int(est.result.d_hat)
        row["lambda" + tag] = float(est.lam)
        if sub.L >= 2:
            lr = cv_avg_lowrank(sub, Z_hat, mfold_plan(sub.L, min(config.folds, sub.L), seed))
            row["err_avglr" + tag] = _err(_aligned_B(lr.result.B_hat.entries, al.permutation), B)
            row["d_avglr" + tag] = int(lr.selected_rank)


# -- aggregation and the driver ------------------------------------------------

@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    aggregates: dict

    @property
    def failed(self) -> int:
        return sum(1 for r in self.rows if r["status"] != "ok")

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows if r["status"] == "ok" and name in r], dtype=float)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "config": self.config.to_dict(),
            "replicates": _jsonable(self.rows),
            "aggregates": _jsonable(self.aggregates),
            "failed": self.failed,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def aggregate(rows: Sequence[dict]) -> dict:
    """Mean and standard error (sample sd / sqrt(count)) of every numeric column
    over the successful replicates."""
    ok = [r for r in rows if r["status"] == "ok"]
    names = sorted({k for r in ok for k, v in r.items()
                    if k not in ("replicate", "seed") and isinstance(v, (int, float, bool, np.number))})
    out = {}
    for name in names:
        vals = np.array([float(r[name]) for r in ok if name in r])
        se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        out[name] = {"mean": float(vals.mean()), "se": se, "count": int(vals.size)}
    return out


def thread_count() -> int:
    """Worker count from ``NETBLOCK_THREADS`` (default 1)."""
    raw = os.environ.get("NETBLOCK_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise DataError(f"NETBLOCK_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def _map(fn, config, indices, workers):
    if workers <= 1 or len(indices) <= 1:
        return [fn(config, r) for r in indices]
    with ProcessPoolExecutor(max_workers=min(workers, len(indices))) as pool:
        return list(pool.map(fn, [config] * len(indices), indices))


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentReport:
    """Run every replicate (in parallel when ``workers > 1``) and aggregate.

    Rows come back in replicate order, so the report is identical for any
    worker count.
    """
    workers = thread_count() if workers is None else workers
    rows = _map(run_replicate, config, list(range(config.replicates)), workers)
    return ExperimentReport(config, rows, aggregate(rows))


@dataclass
class TruncationCurve:
    r_values: np.ndarray
    errors: np.ndarray  # (replicates, len(r_values))
    d: int

    @property
    def mean(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def argmin(self) -> int:
        """Rank minimizing the replicate-averaged relative error."""
        return int(self.r_values[int(np.argmin(self.mean))])

    @property
    def replicate_argmins(self) -> np.ndarray:
        return self.r_values[np.argmin(self.errors, axis=1)]

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "r": self.r_values.tolist(),
            "mean_relative_error": [float(x) for x in self.mean],
            "argmin": self.argmin,
            "replicate_argmins": self.replicate_argmins.tolist(),
            "d": self.d,
        }


def _truncation_replicate(config: ExperimentConfig, r: int, r_values) -> np.ndarray:
    seed = config.seed + r
    rng = np.random.default_rng(np.random.SeedSequence([seed, B_STREAM]))
    B = build_B(config, rng)[0]
    Z = MembershipMatrix.from_sizes(resolve_sizes(config.sizes, config.n, config.K))
    sample = sample_mono(B, Z, config.rho_value, 1, seed, config.self_loops)
    return truncation_errors(average_layers(sample), Z, config.rho_value, B, r_values)


def sweep_truncation(config: ExperimentConfig, r_values: Optional[Sequence[int]] = None) -> TruncationCurve:
    """Relative error of blockwise-averaging the rank-``r`` truncation of a single
    layer, for each ``r`` and replicate (true memberships)."""
    if config.L != 1:
        raise DataError("the truncation sweep uses single-layer configs (L=1)")
    r_values = np.arange(1, config.n + 1) if r_values is None else np.asarray(r_values, dtype=int)
    errors = np.stack([_truncation_replicate(config, r, r_values) for r in range(config.replicates)])
    return TruncationCurve(r_values, errors, config.d)


# -- presets -----------------------------------------------------------------

def _atrunc(rho) -> ExperimentConfig:
    return ExperimentConfig(scenario="mono-true-z", n=500, K=2, d=2, L=1, rho=rho,
                            B={"kind": "explicit", "matrix": [[0.8, 0.3], [0.3, 0.6]]},
                            sizes="equal")


PRESETS = {
    # known memberships, rank one
    "mono-true-z": (
        ExperimentConfig(),
        {"replicates": 100},
    ),
    # spectral-GMM memberships; the desk preset halves n relative to the study
    "mono-est-z": (
        ExperimentConfig(scenario="mono-est-z", n=2000),
        {"n": 10000, "replicates": 100},
    ),
    "reestimate": (
        ExperimentConfig(scenario="reestimate", n=1000, K=10, d=2, L=50, rho=0.15,
                         B={"kind": "uniform-rank-r", "r": 2, "low": 0.2, "high": 0.9}),
        {"replicates": 100},
    ),
    "multi": (
        ExperimentConfig(scenario="multi", n=500, K=3, d=3, L=80, rho="log", sizes="multi",
                         B={"kind": "multi-suite"}, layers_per_group=[20, 20, 20, 20]),
        {"n": 1000, "L": 200, "layers_per_group": [50, 50, 50, 50], "replicates": 100},
    ),
    "atrunc-dense": (_atrunc(1.0), {"n": 1000, "replicates": 100}),
    "atrunc-sparse": (_atrunc("log"), {"n": 1000, "replicates": 100}),
}


def preset(name: str, paper_scale: bool = False, **overrides) -> ExperimentConfig:
    """Named configuration; ``paper_scale`` applies the full-size settings."""
    if name not in PRESETS:
        raise DataError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    config, full = PRESETS[name]
    if paper_scale:
        config = config.replace(**full)
    return config.replace(**overrides) if overrides else config
