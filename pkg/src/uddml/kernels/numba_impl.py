"""Numba-jitted twins of the kernels in ``numpy_impl``.

Same algorithms, same accumulation order where it matters (serial prefix
sums in the tree scan), so both backends grow identical trees; the pairwise
kernel sums agree with the numpy path to accumulation noise.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def kernel_cross_sum(U, V):
    m, q = U.shape
    nv = V.shape[0]
    total = 0.0
    for j in range(m):
        row = 0.0
        for k in range(nv):
            prod = 1.0
            for d in range(q):
                bu = abs(U[j, d] - 0.5)
                bv = abs(V[k, d] - 0.5)
                dd = abs(U[j, d] - V[k, d])
                prod *= 1.875 - 0.25 * bu - 0.25 * bv - 0.75 * dd + 0.5 * dd * dd
            row += prod
        total += row
    return total


@njit(cache=True)
def kernel_self_sum(U):
    m, q = U.shape
    total = 0.0
    for j in range(m):
        prod = 1.0
        for d in range(q):
            prod *= 1.875 - 0.5 * abs(U[j, d] - 0.5)
        total += prod
    for j in range(m):
        row = 0.0
        for k in range(j + 1, m):
            prod = 1.0
            for d in range(q):
                bu = abs(U[j, d] - 0.5)
                bv = abs(U[k, d] - 0.5)
                dd = abs(U[j, d] - U[k, d])
                prod *= 1.875 - 0.25 * bu - 0.25 * bv - 0.75 * dd + 0.5 * dd * dd
            row += prod
        total += 2.0 * row
    return total


@njit(cache=True)
def a1_product_sum(U):
    m, q = U.shape
    total = 0.0
    for j in range(m):
        prod = 1.0
        for d in range(q):
            c = U[j, d] - 0.5
            prod *= 5.0 / 3.0 - 0.25 * abs(c) - 0.25 * c * c
        total += prod
    return total


@njit(cache=True)
def grow_tree(X, order, grad, hess, max_depth, max_leaves, min_child,
              min_hess, lam):
    m, p = X.shape
    cap = 2 * max_leaves + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)
    node_start = np.zeros(cap, dtype=np.int64)
    node_end = np.zeros(cap, dtype=np.int64)
    node_depth = np.zeros(cap, dtype=np.int64)
    node_g = np.zeros(cap, dtype=np.float64)
    node_h = np.zeros(cap, dtype=np.float64)
    best_gain = np.full(cap, -np.inf, dtype=np.float64)
    best_feat = np.full(cap, -1, dtype=np.int64)
    best_thr = np.zeros(cap, dtype=np.float64)
    is_open = np.zeros(cap, dtype=np.bool_)

    idx = order.copy()
    buf_left = np.empty(m, dtype=np.int64)
    buf_right = np.empty(m, dtype=np.int64)

    node_start[0] = 0
    node_end[0] = m
    g0 = 0.0
    h0 = 0.0
    for i in range(m):
        g0 += grad[idx[0, i]]
        h0 += hess[idx[0, i]]
    node_g[0] = g0
    node_h[0] = h0
    is_open[0] = True
    n_nodes = 1
    n_leaves = 1

    # scan-queue of nodes whose best split still needs computing
    pending = np.empty(cap, dtype=np.int64)
    pending[0] = 0
    n_pending = 1

    while True:
        for pi in range(n_pending):
            nid = pending[pi]
            s = node_start[nid]
            e = node_end[nid]
            cnt = e - s
            if node_depth[nid] >= max_depth or cnt < 2 * min_child:
                continue
            gt = node_g[nid]
            ht = node_h[nid]
            parent = gt * gt / (ht + lam)
            bg = 0.0
            bf = -1
            bt = 0.0
            for f in range(p):
                gl = 0.0
                hl = 0.0
                for i in range(s, e - 1):
                    r = idx[f, i]
                    gl += grad[r]
                    hl += hess[r]
                    cl = i - s + 1
                    xv = X[r, f]
                    xn = X[idx[f, i + 1], f]
                    if (xn != xv and cl >= min_child and cnt - cl >= min_child
                            and hl >= min_hess and ht - hl >= min_hess):
                        gain = (gl * gl / (hl + lam)
                                + (gt - gl) * (gt - gl) / (ht - hl + lam)
                                - parent)
                        if gain > bg:
                            thr = 0.5 * (xv + xn)
                            if not (thr < xn):
                                thr = xv
                            bg = gain
                            bf = f
                            bt = thr
            if bf >= 0:
                best_gain[nid] = bg
                best_feat[nid] = bf
                best_thr[nid] = bt
        n_pending = 0

        if n_leaves >= max_leaves:
            break
        nid = -1
        bg = 0.0
        for cand in range(n_nodes):
            if is_open[cand] and best_gain[cand] > bg:
                bg = best_gain[cand]
                nid = cand
        if nid < 0:
            break

        s = node_start[nid]
        e = node_end[nid]
        bf = best_feat[nid]
        bt = best_thr[nid]
        lcnt = 0
        gl = 0.0
        hl = 0.0
        for f in range(p):
            nl = 0
            nr = 0
            for i in range(s, e):
                r = idx[f, i]
                if X[r, bf] <= bt:
                    buf_left[nl] = r
                    nl += 1
                    if f == 0:
                        gl += grad[r]
                        hl += hess[r]
                else:
                    buf_right[nr] = r
                    nr += 1
            for i in range(nl):
                idx[f, s + i] = buf_left[i]
            for i in range(nr):
                idx[f, s + nl + i] = buf_right[i]
            if f == 0:
                lcnt = nl
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[nid] = bf
        threshold[nid] = bt
        left[nid] = lid
        right[nid] = rid
        is_open[nid] = False
        node_start[lid] = s
        node_end[lid] = s + lcnt
        node_start[rid] = s + lcnt
        node_end[rid] = e
        node_depth[lid] = node_depth[nid] + 1
        node_depth[rid] = node_depth[nid] + 1
        node_g[lid] = gl
        node_h[lid] = hl
        node_g[rid] = node_g[nid] - gl
        node_h[rid] = node_h[nid] - hl
        is_open[lid] = True
        is_open[rid] = True
        pending[0] = lid
        pending[1] = rid
        n_pending = 2
        n_leaves += 1

    leaf_of_row = np.zeros(m, dtype=np.int64)
    for nid in range(n_nodes):
        if is_open[nid]:
            denom = node_h[nid] + lam
            if denom < 1e-12:
                denom = 1e-12
            value[nid] = -node_g[nid] / denom
            for i in range(node_start[nid], node_end[nid]):
                leaf_of_row[idx[0, i]] = nid
    return feature, threshold, left, right, value, n_nodes, leaf_of_row


@njit(cache=True)
def tree_predict(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        nid = 0
        while feature[nid] >= 0:
            if X[i, feature[nid]] <= threshold[nid]:
                nid = left[nid]
            else:
                nid = right[nid]
        out[i] = value[nid]
    return out
