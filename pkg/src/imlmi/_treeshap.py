"""Path-dependent TreeSHAP (the polynomial-time recursion over unique paths)."""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def _extend(pf, pz, po, pw, off, depth, zero, one, feat):
    pf[off + depth] = feat
    pz[off + depth] = zero
    po[off + depth] = one
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one * pw[off + i] * (i + 1) / (depth + 1)
        pw[off + i] = zero * pw[off + i] * (depth - i) / (depth + 1)


@njit(cache=True)
def _unwind(pf, pz, po, pw, off, depth, k):
    one = po[off + k]
    zero = pz[off + k]
    nxt = pw[off + depth]
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = pw[off + i]
            pw[off + i] = nxt * (depth + 1) / ((i + 1) * one)
            nxt = tmp - pw[off + i] * zero * (depth - i) / (depth + 1)
        else:
            pw[off + i] = pw[off + i] * (depth + 1) / (zero * (depth - i))
    for i in range(k, depth):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(cache=True)
def _unwound_sum(pz, po, pw, off, depth, k):
    one = po[off + k]
    zero = pz[off + k]
    nxt = pw[off + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = nxt * (depth + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[off + i] - tmp * zero * (depth - i) / (depth + 1)
        else:
            total += pw[off + i] / zero / ((depth - i) / (depth + 1))
    return total


# recursive functions crash when loaded from numba's on-disk cache
@njit(cache=False)
def _recurse(x, feature, threshold, left, right, value, cover, phi, node, depth,
             pf, pz, po, pw, parent_off, parent_zero, parent_one, parent_feat):
    off = parent_off + depth
    for i in range(depth):
        pf[off + i] = pf[parent_off + i]
        pz[off + i] = pz[parent_off + i]
        po[off + i] = po[parent_off + i]
        pw[off + i] = pw[parent_off + i]
    _extend(pf, pz, po, pw, off, depth, parent_zero, parent_one, parent_feat)
    f = feature[node]
    if f == LEAF:
        for i in range(1, depth + 1):
            w = _unwound_sum(pz, po, pw, off, depth, i)
            phi[pf[off + i]] += w * (po[off + i] - pz[off + i]) * value[node]
        return 0
    if x[f] < threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    w = cover[node]
    in_zero = 1.0
    in_one = 1.0
    k = depth + 1
    for i in range(depth + 1):
        if pf[off + i] == f:
            k = i
            break
    if k <= depth:
        in_zero = pz[off + k]
        in_one = po[off + k]
        _unwind(pf, pz, po, pw, off, depth, k)
        depth -= 1
    _recurse(x, feature, threshold, left, right, value, cover, phi, hot, depth + 1,
             pf, pz, po, pw, off, cover[hot] / w * in_zero, in_one, f)
    _recurse(x, feature, threshold, left, right, value, cover, phi, cold, depth + 1,
             pf, pz, po, pw, off, cover[cold] / w * in_zero, 0.0, f)
    return 0


@njit(cache=True)
def _decision_codes(X, feature, threshold):
    """Bit pattern of split decisions over all internal nodes, or -1 if too many."""
    n = X.shape[0]
    codes = np.zeros(n, np.int64)
    bit = 0
    for node in range(feature.shape[0]):
        f = feature[node]
        if f == LEAF:
            continue
        if bit >= 62:
            codes[:] = -1
            return codes
        for i in range(n):
            if X[i, f] < threshold[node]:
                codes[i] |= np.int64(1) << bit
        bit += 1
    return codes


@njit(cache=False)
def tree_shap(X, feature, threshold, left, right, value, cover, max_depth):
    """Unscaled SHAP values summed over trees, shape (n, p).

    The recursion reads ``x`` only through split decisions, so rows sharing
    a decision pattern in a tree share its SHAP values; each pattern is
    evaluated once.
    """
    n, p = X.shape
    phi = np.zeros((n, p))
    size = (max_depth + 2) * (max_depth + 3) // 2 + max_depth + 4
    pf = np.zeros(size, np.int64)
    pz = np.zeros(size)
    po = np.zeros(size)
    pw = np.zeros(size)
    row_phi = np.zeros(p + 1)
    for t in range(feature.shape[0]):
        codes = _decision_codes(X, feature[t], threshold[t])
        order = np.argsort(codes, kind="mergesort")
        a = 0
        while a < n:
            b = a + 1
            if codes[order[a]] >= 0:
                while b < n and codes[order[b]] == codes[order[a]]:
                    b += 1
            row_phi[:] = 0.0
            # slot p collects the dummy root element and is discarded
            _recurse(X[order[a]], feature[t], threshold[t], left[t], right[t], value[t],
                     cover[t], row_phi, 0, 0, pf, pz, po, pw, 0, 1.0, 1.0, p)
            for q in range(a, b):
                for j in range(p):
                    phi[order[q], j] += row_phi[j]
            a = b
    return phi
