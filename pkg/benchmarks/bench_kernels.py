"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 7] [--json out.json]

Times ``block_counts`` on sampled layers and the ADMM loop (reported per
iteration) for several community counts, checks that both backends return
the same numbers, and prints the median wall time and the speedup.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import timeit

import numpy as np

from netblock import _backend
from netblock.admm import AdmmConfig, BlockProblem, lambda_max, solve_blocks
from netblock.model import MembershipMatrix, sample_mono


def _median_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return float(np.median(timer.repeat(repeat=repeat, number=number))) / number


def bench_block_counts(kern, n: int, K: int, rho: float, repeat: int):
    Z = MembershipMatrix.from_sizes([n // K + (1 if k < n % K else 0) for k in range(K)])
    rows, cols = sample_mono(np.full((K, K), 0.5), Z, rho, 1, seed=0).layers[0]
    labels = Z.labels
    out = kern.block_counts(rows, cols, labels, K)
    return out, _median_time(lambda: kern.block_counts(rows, cols, labels, K), repeat), rows.size


def bench_admm(kern, K: int, iters: int, repeat: int):
    rng = np.random.default_rng(K)
    Z = MembershipMatrix(np.concatenate([np.arange(K), rng.integers(0, K, 40 * K)]), K)
    U = rng.uniform(0.1, 1.0, (K, 2))
    B = U @ U.T / 2
    sizes = Z.sizes.astype(float)
    noise = rng.normal(0, 0.05, (K, K)) * np.sqrt(np.outer(sizes, sizes))
    R = np.outer(sizes, sizes) * B + 0.5 * (noise + noise.T)
    prob = BlockProblem(R, sizes, float(np.sum(R ** 2)), Z.n)
    cfg = AdmmConfig(lam=0.05 * lambda_max(prob), epsilon=1e-300, max_iters=iters, clip=False)
    res = solve_blocks(prob, cfg, backend=kern)
    # the tolerance is out of reach, so nearly every solve runs max_iters; report per iteration
    per_iter = _median_time(lambda: solve_blocks(prob, cfg, backend=kern), repeat) / res.iterations
    return res.B_unclipped, per_iter, res.iterations


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    parser.add_argument("--iters", type=int, default=200, help="maximum ADMM iterations per timed solve")
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args(argv)

    names = _backend.available()
    if "cython" not in names:
        print("compiled kernels not built; only the fallback is available", file=sys.stderr)
    rows = []
    for n, K, rho in ((2000, 10, 0.05), (5000, 10, 0.02), (5000, 50, 0.1)):
        results = {name: bench_block_counts(_backend.kernels(name), n, K, rho, args.repeat) for name in names}
        ref = results["python"][0]
        assert all(np.array_equal(r[0], ref) for r in results.values()), "block_counts backends disagree"
        rows.append({"kernel": "block_counts", "case": f"n={n} K={K} edges={results['python'][2]}",
                     **{name: r[1] for name, r in results.items()}})
    for K in (2, 10, 30, 100):
        results = {name: bench_admm(_backend.kernels(name), K, args.iters, args.repeat) for name in names}
        ref = results["python"][0]
        gap = max(float(np.max(np.abs(r[0] - ref))) for r in results.values())
        assert gap <= 1e-8, f"admm_loop backends disagree by {gap}"
        its = {r[2] for r in results.values()}
        assert len(its) == 1, f"backends ran different iteration counts {its}"
        rows.append({"kernel": "admm_loop", "case": f"K={K} per iteration ({its.pop()} its)",
                     **{name: r[1] for name, r in results.items()}})

    print(f"python {platform.python_version()}, numpy {np.__version__}, default backend {_backend.BACKEND}")
    header = f"{'kernel':<13} {'case':<32}" + "".join(f"{name:>12}" for name in names)
    if "cython" in names:
        header += f"{'speedup':>10}"
    print(header)
    for row in rows:
        line = f"{row['kernel']:<13} {row['case']:<32}" + "".join(f"{row[name] * 1e3:>10.3f}ms" for name in names)
        if "cython" in names:
            row["speedup"] = row["python"] / row["cython"]
            line += f"{row['speedup']:>9.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"format_version": 1, "seconds": rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
