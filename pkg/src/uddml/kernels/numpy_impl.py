"""Pure-numpy implementations of the hot numeric kernels.

These are the fallback twins of the numba kernels in ``numba_impl``; the
active set is chosen in ``uddml.kernels`` via the UDDML_BACKEND env var.
Accumulation orders are kept serial-compatible with the numba loops
(``np.cumsum`` is sequential) so that both backends grow identical trees
and agree on discrepancy sums to floating-point noise.
"""

import numpy as np

# Rows per chunk when materialising pairwise kernel blocks.
_CHUNK = 256


def kernel_cross_sum(U, V):
    """Sum of the product kernel over all pairs (row of U, row of V).

    The per-coordinate factor is
    15/8 - |u - 1/2|/4 - |v - 1/2|/4 - 3|u - v|/4 + |u - v|^2/2.
    """
    U = np.ascontiguousarray(U, dtype=np.float64)
    V = np.ascontiguousarray(V, dtype=np.float64)
    m, q = U.shape
    bu = np.abs(U - 0.5)
    bv = np.abs(V - 0.5)
    total = 0.0
    for s in range(0, m, _CHUNK):
        e = min(s + _CHUNK, m)
        block = None
        for d in range(q):
            diff = np.abs(U[s:e, d, None] - V[None, :, d])
            term = (1.875 - 0.25 * bu[s:e, d, None] - 0.25 * bv[None, :, d]
                    - 0.75 * diff + 0.5 * diff * diff)
            block = term if block is None else block * term
        total += float(block.sum())
    return total


def kernel_self_sum(U):
    """kernel_cross_sum(U, U) computed via the symmetric split.

    Off-diagonal pairs are counted twice; the diagonal factor reduces to
    15/8 - |u - 1/2|/2.
    """
    U = np.ascontiguousarray(U, dtype=np.float64)
    m, q = U.shape
    bu = np.abs(U - 0.5)
    diag = np.prod(1.875 - 0.5 * bu, axis=1)
    total = float(diag.sum())
    for s in range(0, m, _CHUNK):
        e = min(s + _CHUNK, m)
        block = None
        for d in range(q):
            diff = np.abs(U[s:e, d, None] - U[None, :, d])
            term = (1.875 - 0.25 * bu[s:e, d, None] - 0.25 * bu[None, :, d]
                    - 0.75 * diff + 0.5 * diff * diff)
            block = term if block is None else block * term
        # strict upper triangle of this row block
        cols = np.arange(m)[None, :]
        rows = np.arange(s, e)[:, None]
        total += 2.0 * float(block[cols > rows].sum())
    return total


def a1_product_sum(U):
    """Sum over rows of the product of 5/3 - |u - 1/2|/4 - (u - 1/2)^2/4."""
    U = np.ascontiguousarray(U, dtype=np.float64)
    c = U - 0.5
    terms = 5.0 / 3.0 - 0.25 * np.abs(c) - 0.25 * c * c
    return float(np.prod(terms, axis=1).sum())


def grow_tree(X, order, grad, hess, max_depth, max_leaves, min_child,
              min_hess, lam):
    """Grow one regression tree on gradient/hessian statistics.

    Best-first growth with exact splits on presorted features: ``order`` holds,
    per feature, the training-row indices sorted by that feature's value. Node
    segments of these lists are partitioned in place as splits are made.
    Split ties keep the lowest feature index, then the lowest threshold; leaf
    values are the regularised Newton step -G/(H + lam).

    Returns (feature, threshold, left, right, value, n_nodes, leaf_of_row);
    feature < 0 marks a leaf.
    """
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

    def scan_node(nid):
        s, e = node_start[nid], node_end[nid]
        cnt = e - s
        if node_depth[nid] >= max_depth or cnt < 2 * min_child:
            return
        gt, ht = node_g[nid], node_h[nid]
        parent = gt * gt / (ht + lam)
        bg, bf, bt = 0.0, -1, 0.0
        for f in range(p):
            seg = idx[f, s:e]
            xv = X[seg, f]
            gl = np.cumsum(grad[seg])[:-1]
            hl = np.cumsum(hess[seg])[:-1]
            cl = np.arange(1, cnt)
            ok = ((xv[1:] != xv[:-1])
                  & (cl >= min_child) & (cnt - cl >= min_child)
                  & (hl >= min_hess) & (ht - hl >= min_hess))
            if not ok.any():
                continue
            gains = (gl * gl / (hl + lam)
                     + (gt - gl) * (gt - gl) / (ht - hl + lam) - parent)
            gains = np.where(ok, gains, -np.inf)
            i = int(np.argmax(gains))
            if gains[i] > bg:
                thr = 0.5 * (xv[i] + xv[i + 1])
                if not (thr < xv[i + 1]):
                    thr = xv[i]
                bg, bf, bt = float(gains[i]), f, float(thr)
        if bf >= 0:
            best_gain[nid] = bg
            best_feat[nid] = bf
            best_thr[nid] = bt

    # root statistics via serial cumulative sums (matches the numba order)
    node_start[0], node_end[0] = 0, m
    node_g[0] = float(np.cumsum(grad[idx[0]])[-1]) if m else 0.0
    node_h[0] = float(np.cumsum(hess[idx[0]])[-1]) if m else 0.0
    is_open[0] = True
    n_nodes = 1
    n_leaves = 1
    scan_node(0)

    while n_leaves < max_leaves:
        nid = -1
        bg = 0.0
        for cand in range(n_nodes):
            if is_open[cand] and best_gain[cand] > bg:
                bg, nid = best_gain[cand], cand
        if nid < 0:
            break
        s, e = node_start[nid], node_end[nid]
        bf, bt = int(best_feat[nid]), float(best_thr[nid])
        lcnt = 0
        for f in range(p):
            seg = idx[f, s:e].copy()
            mask = X[seg, bf] <= bt
            if f == 0:
                lcnt = int(mask.sum())
                gsel = grad[seg[mask]]
                hsel = hess[seg[mask]]
                gl = float(np.cumsum(gsel)[-1]) if lcnt else 0.0
                hl = float(np.cumsum(hsel)[-1]) if lcnt else 0.0
            idx[f, s:e] = np.concatenate((seg[mask], seg[~mask]))
        lid, rid = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[nid] = bf
        threshold[nid] = bt
        left[nid], right[nid] = lid, rid
        is_open[nid] = False
        node_start[lid], node_end[lid] = s, s + lcnt
        node_start[rid], node_end[rid] = s + lcnt, e
        node_depth[lid] = node_depth[rid] = node_depth[nid] + 1
        node_g[lid], node_h[lid] = gl, hl
        node_g[rid], node_h[rid] = node_g[nid] - gl, node_h[nid] - hl
        is_open[lid] = is_open[rid] = True
        scan_node(lid)
        scan_node(rid)
        n_leaves += 1

    leaf_of_row = np.zeros(m, dtype=np.int64)
    for nid in range(n_nodes):
        if is_open[nid]:
            denom = node_h[nid] + lam
            if denom < 1e-12:
                denom = 1e-12
            value[nid] = -node_g[nid] / denom
            leaf_of_row[idx[0, node_start[nid]:node_end[nid]]] = nid
    return feature, threshold, left, right, value, n_nodes, leaf_of_row


def tree_predict(X, feature, threshold, left, right, value):
    """Evaluate one tree on a feature matrix (vectorised node descent)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        f = feature[cur]
        goes_left = X[rows, f] <= threshold[cur]
        node[rows] = np.where(goes_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return value[node]
