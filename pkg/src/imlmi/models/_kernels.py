"""numba kernels for growing and evaluating binary regression trees.

Trees are flat arrays indexed by node id; ``feature == -1`` marks a leaf.
Rows go left when ``x[feature] < threshold``.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def _midpoint(lo, hi):
    thr = lo + 0.5 * (hi - lo)
    if thr <= lo or thr > hi:
        thr = hi
    return thr


@njit(cache=True)
def predict_ensemble(feature, threshold, left, right, value, X):
    """Sum of leaf values over all trees, per row of ``X``."""
    n = X.shape[0]
    out = np.zeros(n)
    for t in range(feature.shape[0]):
        for i in range(n):
            node = 0
            while feature[t, node] != LEAF:
                if X[i, feature[t, node]] < threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[i] += value[t, node]
    return out


@njit(cache=True)
def apply_ensemble(feature, threshold, left, right, X):
    """Leaf id reached by every row in every tree, shape (n_trees, n)."""
    n = X.shape[0]
    out = np.empty((feature.shape[0], n), np.int64)
    for t in range(feature.shape[0]):
        for i in range(n):
            node = 0
            while feature[t, node] != LEAF:
                if X[i, feature[t, node]] < threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[t, i] = node
    return out


@njit(cache=True)
def grow_gbt_tree(X, order, grad, max_depth, lam, feature, threshold, left, right,
                  value, cover, gain, gsum, hsum):
    """Grow one squared-loss boosting tree level by level with exact greedy splits.

    ``order[f]`` lists rows sorted by feature ``f``.  Hessians are 1, so the
    hessian sum of a node equals its cover.  Returns the number of nodes.
    """
    n, p = X.shape
    node_of = np.zeros(n, np.int64)
    G = 0.0
    for i in range(n):
        G += grad[i]
    gsum[0] = G
    hsum[0] = n
    cover[0] = n
    n_nodes = 1
    lo, hi = 0, 1
    for depth in range(max_depth):
        width = hi - lo
        best_gain = np.zeros(width)
        best_feat = np.full(width, -1, np.int64)
        best_thr = np.zeros(width)
        GL = np.zeros(width)
        HL = np.zeros(width)
        last = np.zeros(width)
        for f in range(p):
            GL[:] = 0.0
            HL[:] = 0.0
            for t in range(n):
                i = order[f, t]
                nd = node_of[i] - lo
                if nd < 0 or nd >= width:
                    continue
                v = X[i, f]
                if HL[nd] > 0 and v > last[nd]:
                    Gn = gsum[lo + nd]
                    Hn = hsum[lo + nd]
                    GR = Gn - GL[nd]
                    HR = Hn - HL[nd]
                    g = (GL[nd] * GL[nd] / (HL[nd] + lam) + GR * GR / (HR + lam)
                         - Gn * Gn / (Hn + lam))
                    if g > best_gain[nd]:
                        best_gain[nd] = g
                        best_feat[nd] = f
                        best_thr[nd] = _midpoint(last[nd], v)
                GL[nd] += grad[i]
                HL[nd] += 1.0
                last[nd] = v
        any_split = False
        for nd in range(width):
            node = lo + nd
            if best_feat[nd] >= 0:
                any_split = True
                feature[node] = best_feat[nd]
                threshold[node] = best_thr[nd]
                gain[node] = best_gain[nd]
                left[node] = n_nodes
                right[node] = n_nodes + 1
                gsum[n_nodes] = 0.0
                gsum[n_nodes + 1] = 0.0
                hsum[n_nodes] = 0.0
                hsum[n_nodes + 1] = 0.0
                n_nodes += 2
        if not any_split:
            break
        for i in range(n):
            node = node_of[i]
            if node >= lo and node < hi and feature[node] != LEAF:
                if X[i, feature[node]] < threshold[node]:
                    child = left[node]
                else:
                    child = right[node]
                node_of[i] = child
                gsum[child] += grad[i]
                hsum[child] += 1.0
        for node in range(hi, n_nodes):
            cover[node] = hsum[node]
        lo, hi = hi, n_nodes
    for node in range(n_nodes):
        if feature[node] == LEAF:
            value[node] = -gsum[node] / (hsum[node] + lam)
    return n_nodes


@njit(cache=True)
def grow_cart_tree(X, y, rows, mtry, min_node, max_depth, feat_keys, feature,
                   threshold, left, right, value, cover):
    """Grow one variance-reduction CART tree on ``rows`` (a bootstrap sample).

    Each split tries the ``mtry`` features with the smallest keys in
    ``feat_keys[node]``; both children must keep at least ``min_node`` rows.
    ``max_depth < 0`` means unbounded.  Returns the number of nodes.
    """
    idx = rows.copy()
    stack_node = np.empty(idx.size * 2 + 1, np.int64)
    stack_lo = np.empty(idx.size * 2 + 1, np.int64)
    stack_hi = np.empty(idx.size * 2 + 1, np.int64)
    stack_depth = np.empty(idx.size * 2 + 1, np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = idx.size
    stack_depth[0] = 0
    top = 1
    n_nodes = 1
    xs = np.empty(idx.size)
    ys = np.empty(idx.size)
    while top > 0:
        top -= 1
        node = stack_node[top]
        a = stack_lo[top]
        b = stack_hi[top]
        depth = stack_depth[top]
        m = b - a
        s = 0.0
        for t in range(a, b):
            s += y[idx[t]]
        cover[node] = m
        value[node] = s / m
        feature[node] = LEAF
        if m < 2 * min_node or (max_depth >= 0 and depth >= max_depth):
            continue
        ymin = y[idx[a]]
        ymax = ymin
        for t in range(a, b):
            if y[idx[t]] < ymin:
                ymin = y[idx[t]]
            if y[idx[t]] > ymax:
                ymax = y[idx[t]]
        if ymax == ymin:
            continue
        parent_score = s * s / m
        best = parent_score * (1.0 + 1e-12) + 1e-12
        best_f = -1
        best_thr = 0.0
        cand = np.argsort(feat_keys[node])[:mtry]
        for q in range(mtry):
            f = cand[q]
            for t in range(m):
                xs[t] = X[idx[a + t], f]
            o = np.argsort(xs[:m], kind="mergesort")
            for t in range(m):
                ys[t] = y[idx[a + o[t]]]
            sl = 0.0
            for t in range(m - 1):
                sl += ys[t]
                nl = t + 1
                if nl < min_node or m - nl < min_node:
                    continue
                x0 = xs[o[t]]
                x1 = xs[o[t + 1]]
                if x1 <= x0:
                    continue
                sr = s - sl
                score = sl * sl / nl + sr * sr / (m - nl)
                if score > best:
                    best = score
                    best_f = f
                    best_thr = _midpoint(x0, x1)
        if best_f < 0:
            continue
        # partition idx[a:b] in place
        i = a
        j = b - 1
        while i <= j:
            if X[idx[i], best_f] < best_thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_lo[top] = a
        stack_hi[top] = i
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = n_nodes + 1
        stack_lo[top] = i
        stack_hi[top] = b
        stack_depth[top] = depth + 1
        top += 1
        n_nodes += 2
    return n_nodes


@njit(cache=True)
def pd_ensemble(feature, threshold, left, right, value, X, j, grid):
    """Partial dependence sums over trees for feature ``j`` on ``grid``.

    Grid points that fall between the same pair of a tree's thresholds on
    ``j`` give identical predictions, so each tree is evaluated once per
    distinct interval.  Returns the un-normalised row sums, shape (G,).
    """
    n = X.shape[0]
    G = grid.size
    out = np.zeros(G)
    x = np.empty(X.shape[1])
    sig = np.empty(G, np.int64)
    for t in range(feature.shape[0]):
        for g in range(G):
            s = 0
            for node in range(feature.shape[1]):
                if feature[t, node] == j and grid[g] >= threshold[t, node]:
                    s += 1
            sig[g] = s
        done = np.zeros(G, np.bool_)
        for g in range(G):
            if done[g]:
                continue
            total = 0.0
            for i in range(n):
                for q in range(X.shape[1]):
                    x[q] = X[i, q]
                x[j] = grid[g]
                node = 0
                while feature[t, node] != LEAF:
                    if x[feature[t, node]] < threshold[t, node]:
                        node = left[t, node]
                    else:
                        node = right[t, node]
                total += value[t, node]
            for h in range(g, G):
                if sig[h] == sig[g]:
                    out[h] += total
                    done[h] = True
    return out


@njit(cache=True)
def boost(X, order, y, rounds, max_depth, lam, lr, feature, threshold, left, right, value,
          cover, gain, gsum, hsum, n_nodes):
    """Run all boosting rounds; tree ``r`` is written to row ``r`` of the arrays."""
    n = X.shape[0]
    base = 0.0
    for i in range(n):
        base += y[i]
    base /= n
    pred = np.full(n, base)
    grad = np.empty(n)
    for r in range(rounds):
        for i in range(n):
            grad[i] = pred[i] - y[i]
        n_nodes[r] = grow_gbt_tree(X, order, grad, max_depth, lam, feature[r], threshold[r],
                                   left[r], right[r], value[r], cover[r], gain[r], gsum[r],
                                   hsum[r])
        for i in range(n):
            node = 0
            while feature[r, node] != LEAF:
                if X[i, feature[r, node]] < threshold[r, node]:
                    node = left[r, node]
                else:
                    node = right[r, node]
            pred[i] += lr * value[r, node]
    return base
