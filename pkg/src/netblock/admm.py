"""ADMM for nuclear-norm penalized symmetric least squares.

Solves::

    minimize_W  c * ||Y - X W X^T||_F^2 + lam * ||W||_*   s.t.  W = W^T

with ``c = 1`` (raw) or ``c = 1/n`` (per-node scaling), via the split
``V = W`` and the scaled augmented Lagrangian.  The quadratic W-step is
solved in closed form: for a membership matrix ``X`` the normal equations
are diagonal in the entries of W; for a general ``X`` they become diagonal
after rotating into the eigenbasis of ``X^T X``.  Because SVT is
orthogonally equivariant the whole iteration runs in that basis.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from . import _backend
from .errors import DataError, NumericalError
from .model import AveragedAdjacency, ConnectivityMatrix, MembershipMatrix, as_matrix
from .numerics import numerical_rank, operator_norm, svt

__all__ = [
    "DEFAULT_EPSILON",
    "AdmmConfig",
    "AdmmState",
    "SolveResult",
    "BlockProblem",
    "w_update",
    "v_update",
    "theta_update",
    "admm_solve",
    "solve_general",
    "solve_blocks",
    "path_blocks",
    "auto_rho1",
    "lambda_max",
    "solve_path",
    "objective",
]

Scaling = Literal["raw", "per-node"]

DEFAULT_EPSILON = 1e-20


@dataclass(frozen=True)
class AdmmConfig:
    """Solver settings.

    ``rho1=None`` picks the augmented-Lagrangian weight from the problem's
    curvature range (geometric mean of the smallest and largest entrywise
    curvature of the quadratic term), which keeps the iteration count
    roughly independent of ``n``.

    ``epsilon`` bounds ``||W^t - W^{t-1}||_F^2 / K^2`` at exit.  The default
    is tight because the iteration contracts only by a constant factor per
    step, so a loose bound leaves ``W`` far enough from the optimum that
    spurious eigenvalues survive the threshold and inflate the rank.  The
    bound is never taken below the floating-point resolution of ``W``.
    """

    lam: float = 1.0
    rho1: Optional[float] = None
    epsilon: float = DEFAULT_EPSILON
    max_iters: int = 10000
    scaling: Scaling = "raw"
    clip: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise DataError(f"lam must be positive, got {self.lam}")
        if self.rho1 is not None and not self.rho1 > 0:
            raise DataError(f"rho1 must be positive, got {self.rho1}")
        if not self.epsilon > 0:
            raise DataError("epsilon must be positive")
        if self.max_iters < 1:
            raise DataError("max_iters must be at least 1")
        if self.scaling not in ("raw", "per-node"):
            raise DataError(f"unknown scaling {self.scaling!r}")

    def with_lambda(self, lam: float) -> "AdmmConfig":
        return dataclasses.replace(self, lam=float(lam))


@dataclass
class AdmmState:
    W: np.ndarray
    V: np.ndarray
    Theta: np.ndarray
    iter: int = 0
    w_change: float = float("inf")
    primal_residual: float = float("inf")
    shrunk: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = False

    def copy(self) -> "AdmmState":
        return AdmmState(self.W.copy(), self.V.copy(), self.Theta.copy(), self.iter,
                         self.w_change, self.primal_residual, self.shrunk.copy(), self.converged)


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one penalized solve.

    ``B_hat`` is the (optionally clipped) probability estimate ``V / rho``;
    ``B_unclipped`` keeps the raw solver output.  ``objective_value`` is
    evaluated at ``V`` under the configured scaling.
    """

    B_hat: ConnectivityMatrix
    B_unclipped: np.ndarray
    d_hat: int
    lambda_used: float
    iterations: int
    objective_value: float
    converged: bool
    clipped_fraction: float
    state: AdmmState
    rank_source: str = "V"


@dataclass(frozen=True)
class BlockProblem:
    """Sufficient statistics of ``||Y - X W X^T||_F^2`` in the solve basis.

    ``R = Q^T X^T Y X Q`` and ``weights = d d^T`` where ``X^T X = Q diag(d) Q^T``;
    for a membership matrix ``Q`` is the identity (stored as ``None``) and
    ``d`` the community sizes.
    """

    R: np.ndarray
    d: np.ndarray
    sq_norm: float
    n: int
    Q: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return self.R.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.d, self.d)

    def scale(self, scaling: str) -> float:
        return 1.0 if scaling == "raw" else 1.0 / self.n

    def to_basis(self, M: np.ndarray) -> np.ndarray:
        return M if self.Q is None else self.Q.T @ M @ self.Q

    def from_basis(self, M: np.ndarray) -> np.ndarray:
        if self.Q is None:
            return M
        out = self.Q @ M @ self.Q.T
        return 0.5 * (out + out.T)

    def loss(self, W_basis: np.ndarray) -> float:
        """``||Y - X W X^T||_F^2`` for ``W`` given in the solve basis."""
        val = self.sq_norm - 2.0 * float(np.sum(self.R * W_basis)) + float(np.sum(self.weights * W_basis ** 2))
        return max(val, 0.0)

    @classmethod
    def from_membership(cls, R: np.ndarray, sizes: np.ndarray, sq_norm: float) -> "BlockProblem":
        sizes = np.asarray(sizes, dtype=float)
        if np.any(sizes == 0):
            empty = np.flatnonzero(sizes == 0).tolist()
            raise DataError(f"estimated communities {empty} are empty")
        R = 0.5 * (R + R.T)
        return cls(np.ascontiguousarray(R), sizes, float(sq_norm), int(sizes.sum()))

    @classmethod
    def from_dense(cls, Y, X) -> "BlockProblem":
        Y = as_matrix(Y)
        if isinstance(X, MembershipMatrix):
            if X.n != Y.shape[0]:
                raise DataError(f"membership has {X.n} nodes but Y is {Y.shape}")
            Zm = X.Z
            return cls.from_membership(Zm.T @ Y @ Zm, X.sizes, float(np.sum(Y * Y)))
        X = np.asarray(X, dtype=float)
        if Y.ndim != 2 or Y.shape[0] != Y.shape[1] or X.shape[0] != Y.shape[0]:
            raise DataError(f"shape mismatch: Y {Y.shape}, X {X.shape}")
        if _is_membership(X):
            return cls.from_dense(Y, MembershipMatrix(np.argmax(X, axis=1), X.shape[1]))
        d, Q = np.linalg.eigh(X.T @ X)
        d = np.maximum(d, 0.0)
        R = Q.T @ (X.T @ Y @ X) @ Q
        R = 0.5 * (R + R.T)
        return cls(np.ascontiguousarray(R), d, float(np.sum(Y * Y)), Y.shape[0], Q)


def _is_membership(X: np.ndarray) -> bool:
    return bool(np.all((X == 0) | (X == 1)) and np.all(X.sum(axis=1) == 1))


def objective(Y, X, W, lam: float, scaling: Scaling = "raw") -> float:
    """``c * ||Y - X W X^T||_F^2 + lam * ||W||_*`` evaluated densely."""
    Y = as_matrix(Y)
    X = X.Z if isinstance(X, MembershipMatrix) else np.asarray(X, dtype=float)
    c = 1.0 if scaling == "raw" else 1.0 / Y.shape[0]
    resid = Y - X @ W @ X.T
    return c * float(np.sum(resid ** 2)) + lam * float(np.sum(np.linalg.svd(W, compute_uv=False)))


# -- single steps -----------------------------------------------------------

def w_update(Y, X, V, Theta, rho1: float, scaling: Scaling = "raw") -> np.ndarray:
    """Exact minimizer of ``c||Y - X W X^T||^2 + (rho1/2)||V - W + Theta||^2``."""
    if not rho1 > 0:
        raise DataError(f"rho1 must be positive, got {rho1}")
    prob = BlockProblem.from_dense(Y, X)
    V = np.asarray(V, dtype=float)
    Theta = np.asarray(Theta, dtype=float)
    if V.shape != (prob.K, prob.K) or Theta.shape != (prob.K, prob.K):
        raise DataError("V and Theta must be K x K")
    c = prob.scale(scaling)
    rhs = 2.0 * c * prob.R + rho1 * prob.to_basis(V + Theta)
    W = rhs / (2.0 * c * prob.weights + rho1)
    return prob.from_basis(W) if prob.Q is not None else W


def v_update(W, Theta, lam: float, rho1: float) -> np.ndarray:
    """``svt(W - Theta, lam / rho1)``."""
    if not lam > 0 or not rho1 > 0:
        raise DataError("lam and rho1 must be positive")
    return svt(np.asarray(W, dtype=float) - np.asarray(Theta, dtype=float), lam / rho1)


def theta_update(Theta, V, W) -> np.ndarray:
    """Scaled dual ascent ``Theta + V - W``."""
    Theta, V, W = (np.asarray(a, dtype=float) for a in (Theta, V, W))
    if not (Theta.shape == V.shape == W.shape):
        raise DataError("Theta, V and W must share a shape")
    return Theta + V - W


# -- full solves ------------------------------------------------------------

def auto_rho1(prob: BlockProblem, scaling: str) -> float:
    c = prob.scale(scaling)
    d = prob.d
    lo, hi = float(d.min()), float(d.max())
    if lo <= 1e-12 * max(hi, 1.0):
        return 2.0 * c * float(np.mean(d)) ** 2 or 1.0
    return 2.0 * c * lo * hi


def _effective_epsilon(prob: BlockProblem, cfg: AdmmConfig) -> float:
    """``cfg.epsilon``, raised to the squared rounding level of the unpenalized solution."""
    w = prob.weights
    mask = w > 1e-12 * max(float(w.max()), 1e-300)
    scale = float(np.max(np.abs(prob.R[mask]) / w[mask])) if np.any(mask) else 0.0
    return max(cfg.epsilon, (1e-13 * scale) ** 2)


def _run(prob: BlockProblem, cfg: AdmmConfig, state: Optional[AdmmState], backend=None) -> AdmmState:
    """Iterate from ``state`` (in the solve basis) or from zeros."""
    K = prob.K
    if state is None:
        state = AdmmState(np.zeros((K, K)), np.zeros((K, K)), np.zeros((K, K)))
    else:
        state = state.copy()
    shrunk = np.zeros(K)
    rho1 = cfg.rho1 if cfg.rho1 is not None else auto_rho1(prob, cfg.scaling)
    loop = backend.admm_loop if backend is not None else _backend.admm_loop
    it, w_change, done, info = loop(
        prob.R, np.ascontiguousarray(prob.weights), prob.scale(cfg.scaling), float(rho1),
        cfg.lam / rho1, _effective_epsilon(prob, cfg), int(cfg.max_iters), state.W, state.V, state.Theta, shrunk,
    )
    if info != 0 or not (np.all(np.isfinite(state.W)) and np.all(np.isfinite(state.V))):
        raise NumericalError(f"ADMM produced non-finite iterates (info={info}); check lam/rho1")
    state.iter = state.iter + int(it)
    state.w_change = float(w_change)
    state.primal_residual = float(np.linalg.norm(state.V - state.W))
    state.shrunk = shrunk
    state.converged = bool(done)
    return state


def _result(prob: BlockProblem, cfg: AdmmConfig, state: AdmmState, iters: int, rho: float) -> SolveResult:
    K = prob.K
    eps = _effective_epsilon(prob, cfg)
    converged = state.converged
    c = prob.scale(cfg.scaling)
    obj = c * prob.loss(state.V) + cfg.lam * float(np.sum(np.abs(state.shrunk)))
    V = prob.from_basis(state.V)
    rank_source = "V"
    d_hat = int(np.count_nonzero(state.shrunk))
    if state.primal_residual > 10.0 * K * np.sqrt(eps) and not converged:
        d_hat = numerical_rank(prob.from_basis(state.W), 1e-6)
        rank_source = "W"
    B_raw = V / rho
    B = np.clip(B_raw, 0.0, 1.0) if cfg.clip else B_raw
    clipped = float(np.mean(B != B_raw))
    return SolveResult(
        B_hat=ConnectivityMatrix(B, probability=cfg.clip),
        B_unclipped=B_raw,
        d_hat=d_hat,
        lambda_used=cfg.lam,
        iterations=iters,
        objective_value=obj,
        converged=bool(converged),
        clipped_fraction=clipped,
        state=state,
        rank_source=rank_source,
    )


def solve_blocks(prob: BlockProblem, cfg: AdmmConfig, rho: float = 1.0,
                 warm: Optional[AdmmState] = None, backend=None) -> SolveResult:
    """Solve from precomputed block statistics; ``warm`` is in the solve basis."""
    start = 0 if warm is None else warm.iter
    state = _run(prob, cfg, warm, backend)
    return _result(prob, cfg, state, state.iter - start, rho)


def solve_general(Y, X, cfg: AdmmConfig, backend=None) -> SolveResult:
    """Solve the general problem for an arbitrary feature matrix ``X`` (``rho = 1``)."""
    return solve_blocks(BlockProblem.from_dense(Y, X), cfg, 1.0, None, backend)


def _check_rho(rho: float):
    if not (0 < rho <= 1):
        raise DataError(f"rho must lie in (0, 1], got {rho}")


def admm_solve(Y, Z_hat: MembershipMatrix, rho: float, cfg: AdmmConfig) -> SolveResult:
    """Estimate ``B`` from an averaged adjacency matrix with penalty ``cfg.lam``.

    Iterates from zero until both ``||W^t - W^{t-1}||_F^2 / K^2`` and
    ``||V^t - W^t||_F^2 / K^2`` are at most ``epsilon``, or ``max_iters``; returns ``B_hat = V / rho`` and ``d_hat = rank(V)``.
    """
    _check_rho(rho)
    Y = as_matrix(Y)
    if not np.array_equal(Y, Y.T) and not np.allclose(Y, Y.T, rtol=0, atol=1e-12):
        raise DataError("Y must be symmetric")
    return solve_blocks(BlockProblem.from_dense(Y, Z_hat), cfg, rho)


def lambda_max(Y, X=None, scaling: Scaling = "raw") -> float:
    """Smallest ``lam`` whose penalized solution is exactly zero: ``2 c ||X^T Y X||_op``.

    ``Y`` may also be a :class:`BlockProblem`, in which case ``X`` is ignored.
    """
    if isinstance(Y, BlockProblem):
        return 2.0 * Y.scale(scaling) * operator_norm(Y.R)
    Yd = as_matrix(Y)
    Xd = X.Z if isinstance(X, MembershipMatrix) else np.asarray(X, dtype=float)
    if Yd.ndim != 2 or Yd.shape[0] != Yd.shape[1] or Xd.ndim != 2 or Xd.shape[0] != Yd.shape[0]:
        raise DataError(f"shape mismatch: Y {Yd.shape}, X {Xd.shape}")
    return 2.0 * _scale(scaling, Yd.shape[0]) * operator_norm(Xd.T @ Yd @ Xd)


def _scale(scaling: str, n: int) -> float:
    return 1.0 if scaling == "raw" else 1.0 / n


def _check_grid(lambdas: Sequence[float]) -> np.ndarray:
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise DataError("lambda grid must be a non-empty 1-D sequence")
    if np.any(lambdas <= 0):
        raise DataError("lambda grid must be positive")
    if np.any(np.diff(lambdas) <= 0):
        raise DataError("lambda grid must be strictly ascending")
    return lambdas


def path_blocks(prob: BlockProblem, lambdas: Sequence[float], cfg: AdmmConfig,
                rho: float = 1.0) -> list[SolveResult]:
    """Warm-started solves along an ascending grid on block statistics."""
    lambdas = _check_grid(lambdas)
    out, warm = [], None
    for lam in lambdas:
        res = solve_blocks(prob, cfg.with_lambda(lam), rho, warm)
        warm = res.state
        out.append(res)
    return out


def solve_path(Y, Z_hat: MembershipMatrix, rho: float, lambdas: Sequence[float],
               cfg: AdmmConfig) -> list[SolveResult]:
    """Solve for each ``lam`` in an ascending grid, smallest first, warm-starting each
    solve from the previous solution."""
    _check_rho(rho)
    return path_blocks(BlockProblem.from_dense(Y, Z_hat), lambdas, cfg, rho)
