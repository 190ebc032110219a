"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Both implementations share signatures and in-place semantics so callers
never need to know which one is active.
"""
import numpy as np


def block_counts(rows, cols, labels, K):
    a = labels[rows]
    b = labels[cols]
    off = rows != cols
    flat = np.concatenate([a * K + b, (b * K + a)[off]])
    return np.bincount(flat, minlength=K * K).reshape(K, K).astype(float)


def admm_loop(R, N, c, rho1, tau, eps, max_iters, W, V, Theta, shrunk):
    den = 2.0 * c * N + rho1
    num_fixed = 2.0 * c * R
    w_change = np.inf
    it = 0
    while it < max_iters:
        it += 1
        Wn = (num_fixed + rho1 * (V + Theta)) / den
        diff = float(np.sum((Wn - W) ** 2))
        W[...] = Wn
        M = W - Theta
        M = 0.5 * (M + M.T)
        try:
            ev, Q = np.linalg.eigh(M)
        except np.linalg.LinAlgError:
            return it, w_change, False, 1
        s = np.abs(ev) - tau
        s = np.where(s > 0, np.where(ev > 0, s, -s), 0.0)
        shrunk[:] = s
        Vn = (Q * s) @ Q.T
        V[...] = np.triu(Vn) + np.triu(Vn, 1).T
        r = V - W
        Theta += r
        w_change = diff / W.size
        if not np.isfinite(w_change):
            return it, w_change, False, -1
        if w_change <= eps and float(np.sum(r * r)) / W.size <= eps:
            return it, w_change, True, 0
    return it, w_change, False, 0
