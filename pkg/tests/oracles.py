"""Independent reference implementations used only by the tests.

None of these import solver code from the package; they work on dense
matrices with textbook algorithms so that agreement is meaningful.
"""
import itertools

import numpy as np


def dense_objective(Y, X, W, lam, c=1.0):
    resid = Y - X @ W @ X.T
    return c * float(np.sum(resid * resid)) + lam * float(np.sum(np.linalg.svd(W, compute_uv=False)))


def _prox_nuclear_sym(M, tau):
    M = 0.5 * (M + M.T)
    U, s, Vt = np.linalg.svd(M)
    out = (U * np.maximum(s - tau, 0.0)) @ Vt
    return 0.5 * (out + out.T)


def fista(Y, X, lam, c=1.0, tol=1e-15, max_iter=200000):
    """Accelerated proximal gradient with adaptive restart for
    ``min_W c||Y - X W X^T||^2 + lam ||W||_*`` over symmetric ``W``."""
    G = X.T @ X
    XYX = X.T @ Y @ X
    lip = 2.0 * c * np.linalg.norm(G, 2) ** 2
    step = 1.0 / lip
    K = X.shape[1]
    W = np.zeros((K, K))
    Zk = W.copy()
    t = 1.0
    y2 = float(np.sum(Y * Y))

    def obj_of(M):  # ||Y - X M X^T||^2 expanded through the Gram matrix
        quad = y2 - 2.0 * float(np.sum(XYX * M)) + float(np.sum((G @ M @ G) * M))
        return c * quad + lam * float(np.sum(np.linalg.svd(M, compute_uv=False)))

    obj_prev = obj_of(W)
    for _ in range(max_iter):
        grad = -2.0 * c * (XYX - G @ Zk @ G)
        W_new = _prox_nuclear_sym(Zk - step * grad, step * lam)
        obj = obj_of(W_new)
        if obj > obj_prev:
            if t == 1.0:  # a plain gradient step from W no longer descends
                break
            t = 1.0  # restart momentum
            Zk = W.copy()
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Zk = W_new + ((t - 1.0) / t_new) * (W_new - W)
        moved = float(np.sum((W_new - W) ** 2))
        W, t, obj_prev = W_new, t_new, obj
        if moved <= tol * max(1.0, float(np.sum(W * W))):
            break
    return W, dense_objective(Y, X, W, lam, c)


def kron_w_update(Y, X, V, Theta, rho1, c=1.0):
    """W-step from the full ``K^2 x K^2`` normal equations (no structure used)."""
    K = X.shape[1]
    A = np.kron(X, X)  # vec(X W X^T) = (X kron X) vec(W) for column-major vec
    y = Y.reshape(-1, order="F")
    target = (V + Theta).reshape(-1, order="F")
    lhs = 2.0 * c * A.T @ A + rho1 * np.eye(K * K)
    rhs = 2.0 * c * A.T @ y + rho1 * target
    return np.linalg.solve(lhs, rhs).reshape(K, K, order="F")


def power_iteration(M, iters=20000, seed=0):
    """Largest singular value via power iteration on ``M^T M``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    G = M.T @ M
    val = 0.0
    for _ in range(iters):
        w = G @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        new = float(v @ G @ v)
        if abs(new - val) <= 1e-15 * max(new, 1.0):
            val = new
            break
        val = new
    return float(np.sqrt(val))


def exhaustive_misclustering(g_hat, g, K):
    g_hat = np.asarray(g_hat)
    g = np.asarray(g)
    best = np.inf
    for perm in itertools.permutations(range(K)):
        rate = float(np.mean(np.asarray(perm)[g_hat] != g))
        best = min(best, rate)
    return best


def ari_by_hand(a, b):
    """ARI from pair counts of the contingency table."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return float(np.sum(x * (x - 1) / 2))

    index = pairs(table)
    ra, cb = pairs(table.sum(1)), pairs(table.sum(0))
    total = n * (n - 1) / 2
    expected = ra * cb / total
    top = 0.5 * (ra + cb)
    if top == expected:
        return 1.0
    return (index - expected) / (top - expected)


def random_membership(rng, n_max=60, K_max=6, min_size=1):
    K = int(rng.integers(1, K_max + 1))
    n = int(rng.integers(K * min_size, n_max + 1))
    labels = np.concatenate([np.arange(K), rng.integers(0, K, n - K)])
    rng.shuffle(labels)
    return labels, K


def one_hot(labels, K):
    Z = np.zeros((labels.size, K))
    Z[np.arange(labels.size), labels] = 1.0
    return Z


def random_symmetric(rng, n, low=0.0, high=1.0):
    M = rng.uniform(low, high, (n, n))
    return np.triu(M) + np.triu(M, 1).T
