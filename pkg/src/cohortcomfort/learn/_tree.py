"""Compiled kernels for Gini decision trees.

Trees are stored as flat node arrays: ``feature[i] == -1`` marks a leaf whose
class index is ``leaf[i]``; otherwise rows with ``x[feature] <= threshold``
go to ``left[i]`` and the rest to ``right[i]``.  Class indices are 0, 1, 2
for preferences -1, 0, +1.

Randomness comes from a splitmix64 stream keyed by the node's path from the
root, so a node's feature draw does not depend on traversal order or on how
deep the rest of the tree grows.
"""

import numpy as np
from numba import njit

N_CLASSES = 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _pick_leaf(counts, priority):
    # priority[r] is the class index with rank r; earlier rank wins ties
    best = priority[0]
    for r in range(1, N_CLASSES):
        c = priority[r]
        if counts[c] > counts[best]:
            best = c
    return best


@njit(cache=True)
def fit_tree(X, y, sample, max_depth, min_split, min_leaf, n_sub, seed, priority):
    m = sample.shape[0]
    p = X.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    leaf = np.zeros(cap, dtype=np.int8)

    idx = sample.copy()
    buf = np.empty(m, dtype=np.int64)
    vals = np.empty(m, dtype=np.float64)
    perm = np.empty(p, dtype=np.int64)

    # stack entries: node id, start, end, depth, rng key
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_key = np.empty(cap, dtype=np.uint64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    st_key[0] = _mix(np.uint64(seed))
    top = 1
    n_nodes = 1

    counts = np.zeros(N_CLASSES, dtype=np.int64)
    cl = np.zeros(N_CLASSES, dtype=np.int64)

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        key = st_key[top]
        n = end - start

        counts[:] = 0
        for i in range(start, end):
            counts[y[idx[i]]] += 1
        n_present = 0
        for c in range(N_CLASSES):
            if counts[c] > 0:
                n_present += 1
        leaf[node] = _pick_leaf(counts, priority)
        if depth >= max_depth or n < min_split or n_present <= 1 or n < 2 * min_leaf:
            continue

        # random feature order for this node
        for j in range(p):
            perm[j] = j
        r = key
        for j in range(p - 1, 0, -1):
            r = _mix(r)
            k = np.int64(r >> np.uint64(11)) % (j + 1)
            tmp = perm[j]
            perm[j] = perm[k]
            perm[k] = tmp

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        visited = 0
        for jj in range(p):
            if visited >= n_sub:
                break
            f = perm[jj]
            lo = np.inf
            hi = -np.inf
            for i in range(n):
                v = X[idx[start + i], f]
                vals[i] = v
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            if lo == hi:
                continue
            visited += 1
            order = np.argsort(vals[:n], kind="mergesort")
            cl[:] = 0
            for i in range(1, n):
                cl[y[idx[start + order[i - 1]]]] += 1
                v_prev = vals[order[i - 1]]
                v_next = vals[order[i]]
                if i < min_leaf or n - i < min_leaf or not v_prev < v_next:
                    continue
                sl = 0.0
                sr = 0.0
                for c in range(N_CLASSES):
                    a = float(cl[c])
                    b = float(counts[c] - cl[c])
                    sl += a * a
                    sr += b * b
                score = sl / i + sr / (n - i)
                if score > best_score + 1e-12:
                    best_score = score
                    best_f = f
                    thr = v_prev + (v_next - v_prev) / 2.0
                    if not thr < v_next:
                        thr = v_prev
                    best_thr = thr
        if best_f < 0:
            continue

        # stable partition of idx[start:end]
        nl = 0
        nr = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_thr:
                idx[start + nl] = idx[i]
                nl += 1
            else:
                buf[nr] = idx[i]
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode

        st_node[top] = rnode
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        st_key[top] = _mix(key ^ np.uint64(2))
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        st_key[top] = _mix(key ^ np.uint64(1))
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), leaf[:n_nodes].copy())


@njit(cache=True)
def forest_votes(X, feature, threshold, left, right, leaf, offsets):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    votes = np.zeros((n, N_CLASSES), dtype=np.int64)
    for i in range(n):
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if X[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            votes[i, leaf[base + node]] += 1
    return votes


@njit(cache=True)
def resolve_votes(votes, priority):
    n = votes.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _pick_leaf(votes[i], priority)
    return out
