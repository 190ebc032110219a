"""Computable forms of the error-bound quantities, for sanity checks and reports.

Everything here is a plain formula evaluation.  The bound in
:func:`theorem1_bound` holds only up to an unspecified constant, so it is
evaluated with constant 1 and labeled accordingly; nothing in this module is
meant as a pass/fail gate on absolute constants.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt
from typing import Optional

import numpy as np

from .clustering import align_labels
from .errors import DataError
from .model import MembershipMatrix, as_matrix
from .numerics import operator_norm

__all__ = [
    "TheoryContext",
    "Lemma1Check",
    "lemma1_check",
    "balance_constant",
    "lambda_val",
    "theorem1_bound",
    "lambda_window",
    "sample_size_conditions",
    "BOUND_LABEL",
]

BOUND_LABEL = "up to constants"
_R2 = sqrt(2.0)


@dataclass(frozen=True)
class TheoryContext:
    """Problem sizes and constants entering the bounds.

    ``C_prime`` and ``C_double_prime`` are the unnamed constants of the
    sample-size conditions; when absent the conditions are reported as
    unchecked.  ``C_triple_prime`` scales the single-layer variant and is
    taken as 1 when absent, like the other suppressed constants.
    """

    n: int
    K: int
    L: int
    rho: float
    d: int = 1
    c1: float = 1.0
    c2: float = 1.0
    misclustered: int = 0
    B_op: float = 0.0
    B_max: float = 0.0
    C_prime: Optional[float] = None
    C_double_prime: Optional[float] = None
    C_triple_prime: Optional[float] = None

    def __post_init__(self):
        if self.n < 2:
            raise DataError("n must be at least 2 (log n must be positive)")
        if self.K < 1 or self.L < 1:
            raise DataError("K and L must be positive")
        if not (0 < self.rho <= 1):
            raise DataError(f"rho must lie in (0, 1], got {self.rho}")
        if self.c1 < 1 or self.c2 < 1:
            raise DataError("balance constants c1, c2 must be at least 1")
        if not (0 <= self.misclustered <= self.n):
            raise DataError("misclustered count must lie in [0, n]")
        if self.d < 0 or self.B_op < 0 or self.B_max < 0:
            raise DataError("d, B_op and B_max must be nonnegative")

    @classmethod
    def from_truth(cls, Z: MembershipMatrix, Z_hat: MembershipMatrix, B, L: int, rho: float,
                   d: Optional[int] = None, **constants) -> "TheoryContext":
        """Fill sizes, balance constants, misclustering and norms from ground truth."""
        B = as_matrix(B)
        if Z.n != Z_hat.n or Z.K != Z_hat.K:
            raise DataError("true and estimated memberships disagree in n or K")
        miss = align_labels(Z_hat.labels, Z.labels, Z.K).misclustering_rate
        if d is None:
            d = int(np.linalg.matrix_rank(B))
        return cls(n=Z.n, K=Z.K, L=L, rho=rho, d=d,
                   c1=balance_constant(Z), c2=balance_constant(Z_hat),
                   misclustered=int(round(miss * Z.n)),
                   B_op=operator_norm(B), B_max=float(np.abs(B).max()), **constants)


def balance_constant(Z: MembershipMatrix) -> float:
    """Smallest ``c >= 1`` with every community size in ``[n/(cK), cn/K]``."""
    sizes = Z.sizes.astype(float)
    if np.any(sizes == 0):
        return float("inf")
    ratio = sizes * Z.K / Z.n
    return float(max(1.0, ratio.max(), 1.0 / ratio.min()))


@dataclass(frozen=True)
class Lemma1Check:
    lhs: float
    rhs: float
    holds: bool


def lemma1_check(Z_hat: MembershipMatrix, B, c2: float, tol: float = 1e-12) -> Lemma1Check:
    """Compare ``(1/n)||Z B Z^T||_F^2`` with ``n/(c2 K)^2 ||B||_F^2``.

    Raises if the community sizes fall outside ``[n/(c2 K), c2 n/K]``.
    """
    B = as_matrix(B)
    if B.shape != (Z_hat.K, Z_hat.K):
        raise DataError(f"B has shape {B.shape}, membership has K={Z_hat.K}")
    if c2 < 1:
        raise DataError("c2 must be at least 1")
    n, K = Z_hat.n, Z_hat.K
    sizes = Z_hat.sizes.astype(float)
    lo, hi = n / (c2 * K), c2 * n / K
    if np.any(sizes < lo * (1 - 1e-12)) or np.any(sizes > hi * (1 + 1e-12)):
        raise DataError(f"community sizes {sizes.astype(int).tolist()} violate the balance bounds "
                        f"[{lo:.4g}, {hi:.4g}] for c2={c2}")
    # ||Z B Z^T||_F^2 = sum_kl n_k n_l B_kl^2
    lhs = float(np.sum(np.outer(sizes, sizes) * B ** 2) / n)
    rhs = float(n / (c2 * K) ** 2 * np.sum(B ** 2))
    return Lemma1Check(lhs, rhs, lhs >= rhs - tol)


def _misclustering_factor(ctx: TheoryContext) -> tuple[float, float]:
    frac = ctx.misclustered / ctx.n
    a = sqrt(ctx.c1 / ctx.K)
    return frac, (a + _R2 * sqrt(frac)) ** 2


def _triple(ctx: TheoryContext) -> float:
    # the single-layer variant is evaluated with C''' = 1 unless one is supplied
    return 1.0 if ctx.C_triple_prime is None else ctx.C_triple_prime


def lambda_val(ctx: TheoryContext, l1_variant: bool = False) -> float:
    """Benchmark tuning value anchoring the admissible penalty window.

    ``l1_variant`` swaps the noise term ``12 sqrt(2) sqrt(n rho log n / L)``
    for ``C''' sqrt(n rho)``, the sharper single-layer control.
    """
    n, K, L, rho, c1 = ctx.n, ctx.K, ctx.L, ctx.rho, ctx.c1
    omega = ctx.misclustered
    frac, square = _misclustering_factor(ctx)
    first = 16 * _R2 * c1 / K * sqrt(rho / L) * (sqrt(K) + sqrt(log(n)))
    second = square * (2 * _R2 * rho * sqrt(c1 * n / K) * sqrt(omega) * ctx.B_op + rho * omega * ctx.B_max)
    noise = _triple(ctx) * sqrt(n * rho) if l1_variant else 12 * _R2 * sqrt(n * rho * log(n) / L)
    third = (2 * frac + 2 * _R2 * sqrt(c1 / K) * sqrt(frac)) * noise
    return first + second + third


def theorem1_bound(ctx: TheoryContext, l1_variant: bool = False) -> float:
    """Right-hand side of the nuclear-norm error bound, evaluated with constant 1.

    The result is meaningful only up to constants (see ``BOUND_LABEL``).  With
    no misclustered nodes it reduces to
    ``16 sqrt(2) c1 K d (sqrt(K) + sqrt(log n)) / (n sqrt(L rho))``.
    """
    if ctx.d < 1:
        raise DataError("the bound needs d >= 1")
    n, K, L, rho, c1 = ctx.n, ctx.K, ctx.L, ctx.rho, ctx.c1
    frac, square = _misclustering_factor(ctx)
    a = sqrt(c1 / K)
    first = 16 * _R2 * c1 / K * sqrt(1.0 / (L * n ** 2 * rho)) * (sqrt(K) + sqrt(log(n)))
    second = square * (2 * _R2 * a * ctx.B_op * sqrt(frac) + ctx.B_max * frac)
    noise = _triple(ctx) / sqrt(n * rho) if l1_variant else 12 * _R2 * sqrt(log(n) / (L * n * rho))
    third = (2 * _R2 * a * sqrt(frac) + 2 * frac) * noise
    return K ** 2 * ctx.d * (first + second + third)


def lambda_window(ctx: TheoryContext, C: float = 1.0, l1_variant: bool = False) -> tuple[float, float]:
    """``(3 Lambda_val, 3 C Lambda_val)``, the penalty range covered by the bound."""
    if C < 1:
        raise DataError("C must be at least 1")
    base = 3.0 * lambda_val(ctx, l1_variant)
    return base, C * base


def sample_size_conditions(ctx: TheoryContext) -> dict:
    """Status of the two sample-size conditions: ``"holds"``, ``"fails"`` or
    ``"unchecked"`` when the corresponding constant was not supplied."""
    n, K, L, rho = ctx.n, ctx.K, ctx.L, ctx.rho

    def status(const, lhs, rhs_unit):
        if const is None:
            return "unchecked"
        return "holds" if lhs >= const * rhs_unit else "fails"

    return {
        "signal": status(ctx.C_prime, n * sqrt(L * rho), K * (sqrt(K) + sqrt(log(n)))),
        "density": status(ctx.C_double_prime, L * n * rho, log(n)),
    }
