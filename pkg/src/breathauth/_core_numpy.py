"""Pure-NumPy implementations of the two hot kernels.

Drop-in fallback for the compiled extension ``breathauth._core``; the active
backend is chosen once at import time in ``breathauth._kernels``. Both
backends implement identical semantics, including split tie-breaking.
"""

import numpy as np


def window_msr(profile: np.ndarray, scale: int, q_basis: np.ndarray) -> np.ndarray:
    """Mean-square detrending residual for every window at one scale.

    The profile is partitioned into ``floor(N/scale)`` windows from the start
    and the same number from the end (2*Ns total); each window is detrended
    by projecting onto the orthonormal polynomial basis ``q_basis``.
    """
    n = profile.size
    ns = n // scale
    front = profile[: ns * scale].reshape(ns, scale)
    back = profile[n - ns * scale :].reshape(ns, scale)
    w = np.concatenate([front, back], axis=0)
    resid = w - (w @ q_basis) @ q_basis.T
    return np.mean(resid * resid, axis=1)


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    feats: np.ndarray,
    min_leaf: int,
) -> tuple[int, float, float]:
    """Best binary Gini split for the node holding rows ``idx``.

    Returns ``(feature, threshold, child_impurity)`` where child_impurity is
    the sample-weighted mean Gini of the two children; feature is -1 when no
    valid split exists. Rows with value <= threshold go left. Ties resolve to
    the earliest candidate feature, then to the lowest split position.
    """
    n = idx.size
    best_feat, best_thr, best_cost = -1, 0.0, np.inf
    labels = y[idx]
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ones = np.cumsum(labels[order], dtype=np.float64)
        total1 = ones[-1]
        nl = np.arange(1, n, dtype=np.float64)
        valid = vs[1:] != vs[:-1]
        valid &= (nl >= min_leaf) & (n - nl >= min_leaf)
        if not np.any(valid):
            continue
        nr = n - nl
        l1 = ones[:-1]
        r1 = total1 - l1
        gini_l = 1.0 - (l1 * l1 + (nl - l1) * (nl - l1)) / (nl * nl)
        gini_r = 1.0 - (r1 * r1 + (nr - r1) * (nr - r1)) / (nr * nr)
        cost = (nl * gini_l + nr * gini_r) / n
        cost[~valid] = np.inf
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            thr = 0.5 * (vs[k] + vs[k + 1])
            if thr >= vs[k + 1]:
                thr = vs[k]
            best_feat, best_thr, best_cost = int(f), float(thr), float(cost[k])
    return best_feat, best_thr, best_cost
