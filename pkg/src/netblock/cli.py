"""Command-line interface: ``netblock <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .admm import DEFAULT_EPSILON, AdmmConfig, solve_blocks
from .baselines import averaging_estimator
from .clustering import bias_adjusted_spectral, spectral_cluster
from .errors import DataError, NetblockError, NumericalError
from .experiments import ExperimentConfig, PRESETS, build_B, preset, resolve_sizes, run_experiment, B_STREAM
from .model import MembershipMatrix, average_layers, sample_mono, sample_multi
from .multilayer import cv_estimate, estimate_l_tilde, layer_features, multisbm_estimate
from .numerics import svd_full
from .tuning import subset_problem

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(report: dict, out: Optional[str]) -> None:
    if out:
        io.write_json(out, report)
    else:
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n")


def _sidecar(out: Optional[str], suffix: str, M) -> Optional[str]:
    if not out:
        return None
    path = str(Path(out).with_suffix("")) + suffix
    io.write_matrix(path, M)
    return path


def _admm(args) -> AdmmConfig:
    return AdmmConfig(rho1=args.rho1, epsilon=args.epsilon, max_iters=args.max_iters, scaling=args.scaling)


def _load(args):
    return io.ingest_sample(args.manifest, rho=args.rho, drop_self_loops=args.no_self_loops)


def _membership(args, sample) -> tuple[MembershipMatrix, str]:
    if getattr(args, "labels", None):
        Z = io.read_labels(args.labels)
        if Z.n != sample.n or Z.K != args.k:
            raise DataError(f"{args.labels}: labels give n={Z.n}, K={Z.K}; expected n={sample.n}, K={args.k}")
        return Z, "file"
    method = getattr(args, "clustering", "gmm")
    if method == "bias-adjusted":
        return bias_adjusted_spectral(sample, args.k, "gmm", args.seed).membership, method
    dim = args.embed_dim or args.k
    return spectral_cluster(average_layers(sample), args.k, dim, method, args.seed).membership, method


# -- commands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    config = _config(args)
    if args.no_self_loops:
        config = config.replace(self_loops=False)
    seed = config.seed
    Bs = build_B(config, np.random.default_rng(np.random.SeedSequence([seed, B_STREAM])))
    Z = MembershipMatrix.from_sizes(resolve_sizes(config.sizes, config.n, config.K))
    if config.scenario == "multi":
        sample = sample_multi(Bs, Z, config.rho_value, config.layers_per_group, seed, config.self_loops)
    else:
        sample = sample_mono(Bs[0], Z, config.rho_value, config.L, seed, config.self_loops)
    out = Path(args.out)
    manifest = io.write_sample(sample, out)
    io.write_labels(out / "labels.txt", Z.labels, Z.K)
    for g, B in enumerate(Bs):
        io.write_matrix(out / f"B_{g}.csv", B)
    _emit({"format_version": 1, "manifest": str(manifest), "n": sample.n, "L": sample.L,
           "rho": sample.rho, "config": config.to_dict()}, None)
    return EXIT_OK


def cmd_estimate(args) -> int:
    sample = _load(args)
    Z, how = _membership(args, sample)
    cfg = _admm(args)
    report = {"format_version": 1, "n": sample.n, "L": sample.L, "K": args.k, "rho": sample.rho,
              "membership_source": how, "membership": Z.labels.tolist()}
    if args.lam is not None:
        res = solve_blocks(subset_problem(sample, Z, range(sample.L)), cfg.with_lambda(args.lam), sample.rho)
        report["lambda"] = args.lam
    else:
        cv = cv_estimate(sample, Z, cfg, None, args.folds, args.seed, args.grid_size, args.floor_ratio)
        res = cv.refit
        report["lambda"] = cv.selected_lambda
        report["cv"] = {k: v for k, v in cv.to_dict().items() if k != "B_hat"}
    avg = averaging_estimator(average_layers(sample), Z, sample.rho)
    report.update({
        "d_hat": int(res.d_hat),
        "converged": bool(res.converged),
        "iterations": int(res.iterations),
        "clipped_fraction": float(res.clipped_fraction),
        "B_hat": res.B_hat.entries.tolist(),
        "B_avg": avg.B_hat.entries.tolist(),
    })
    csv = _sidecar(args.out, "_B_hat.csv", res.B_hat.entries)
    if csv:
        report["B_hat_csv"] = csv
    _emit(report, args.out)
    return EXIT_OK


def cmd_multi(args) -> int:
    sample = _load(args)
    Z = io.read_labels(args.labels) if args.labels else None
    res = multisbm_estimate(sample, args.k, args.l_tilde, cfg=_admm(args), folds=args.folds,
                            lam=args.lam, seed=args.seed, Z_hat=Z,
                            truth_groups=sample.group_labels if args.score_groups else None)
    report = res.to_dict()
    if args.out:
        for g, est in enumerate(res.estimates):
            report["groups"][g]["B_hat_csv"] = _sidecar(args.out, f"_B_hat_{g}.csv", est.result.B_hat.entries)
    _emit(report, args.out)
    return EXIT_OK


def cmd_cv(args) -> int:
    sample = _load(args)
    Z, how = _membership(args, sample)
    cv = cv_estimate(sample, Z, _admm(args), None, args.folds, args.seed, args.grid_size, args.floor_ratio)
    report = cv.to_dict()
    report["membership_source"] = how
    _emit(report, args.out)
    return EXIT_OK


def _config(args) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = ExperimentConfig.from_dict(json.load(fh))
        except FileNotFoundError:
            raise DataError(f"{args.config}: config not found") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}: invalid JSON ({exc})") from None
        except TypeError as exc:
            raise DataError(f"{args.config}: {exc}") from None
        if getattr(args, "paper_scale", False):
            raise DataError("--paper-scale applies to presets only")
    else:
        config = preset(args.preset, paper_scale=getattr(args, "paper_scale", False))
    changes = {k: getattr(args, k) for k in ("seed", "replicates") if getattr(args, k, None) is not None}
    return config.replace(**changes) if changes else config


def cmd_bench(args) -> int:
    report = run_experiment(_config(args), workers=args.threads)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_scree(args) -> int:
    sample = _load(args)
    if args.level == "per-layer-A":
        feats = layer_features(sample, level="per-layer-A")
    else:
        if args.k is None:
            raise DataError(f"--level {args.level} needs --k")
        Z, _ = _membership(args, sample)
        if args.level == "avg":
            feats = averaging_estimator(average_layers(sample), Z, sample.rho).B_hat.entries
        else:
            feats = layer_features(sample, Z)
    report = {"format_version": 1, "level": args.level,
              "singular_values": [float(s) for s in svd_full(feats).values]}
    if min(feats.shape) >= 2 and np.any(feats):
        elbow, _ = estimate_l_tilde(feats, min(args.max_candidates, *feats.shape))
        report["elbow"] = elbow
    _emit(report, args.out)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _sample_opts(p, k_required=True):
    p.add_argument("--manifest", required=True, help="sample manifest (JSON)")
    p.add_argument("--k", type=int, required=k_required, help="number of communities")
    p.add_argument("--rho", type=float, help="sparsity factor (overrides the manifest)")
    p.add_argument("--no-self-loops", action="store_true", help="drop diagonal edges on ingest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here (default: stdout)")


def _solver_opts(p):
    p.add_argument("--scaling", choices=("raw", "per-node"), default="raw")
    p.add_argument("--rho1", type=float, help="augmented-Lagrangian weight (default: automatic)")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--floor-ratio", type=float, default=1e-4)


def _cluster_opts(p):
    p.add_argument("--labels", help="membership file; skips clustering")
    p.add_argument("--clustering", choices=("gmm", "kmeans", "bias-adjusted"), default="gmm")
    p.add_argument("--embed-dim", type=int, help="spectral embedding dimension (default: K)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netblock", description="Low-rank connectivity estimation for multilayer block models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a sample from a preset or config and write it to disk")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-self-loops", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate one connectivity matrix from all layers")
    _sample_opts(p)
    _cluster_opts(p)
    _solver_opts(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--lambda", dest="lam", type=float, help="fixed penalty")
    mode.add_argument("--cv", action="store_true", help="cross-validate the penalty (default)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("multi", help="group layers and estimate one matrix per group")
    _sample_opts(p)
    _solver_opts(p)
    p.add_argument("--labels", help="membership file; skips bias-adjusted clustering")
    p.add_argument("--l-tilde", type=int, help="number of layer groups (default: scree elbow)")
    p.add_argument("--lambda", dest="lam", type=float, help="fixed penalty for every group")
    p.add_argument("--score-groups", action="store_true",
                   help="report the between-layer error against the manifest's group_labels")
    p.set_defaults(func=cmd_multi)

    p = sub.add_parser("cv", help="report the penalty path and validation losses")
    _sample_opts(p)
    _cluster_opts(p)
    _solver_opts(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bench", help="run a Monte-Carlo experiment")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker processes (default: NETBLOCK_THREADS or 1)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scree", help="singular values for choosing the number of layer groups")
    _sample_opts(p, k_required=False)
    _cluster_opts(p)
    p.add_argument("--level", choices=("per-layer-B", "per-layer-A", "avg"), default="per-layer-B")
    p.add_argument("--max-candidates", type=int, default=10)
    p.set_defaults(func=cmd_scree)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except NumericalError as exc:
        print(f"netblock: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"netblock: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, NetblockError) as exc:
        print(f"netblock: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"netblock: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
