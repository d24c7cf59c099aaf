"""Independent reference implementations used to pin expected test values.

Everything here is deliberately naive: literal loops, full scans, and
numerical quadrature with panels split at the kernel's kink locations. None
of it shares code with the package paths it checks.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss


def kappa(u, t):
    """Per-coordinate product kernel."""
    return (1.875 - 0.25 * np.abs(u - 0.5) - 0.25 * np.abs(t - 0.5)
            - 0.75 * np.abs(u - t) + 0.5 * (u - t) ** 2)


def _panel(a, b, k):
    x, w = leggauss(k)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def int_kappa_du(t):
    """One-dimensional integral of kappa(., t) over [0, 1] by quadrature.

    The integrand is piecewise quadratic with kinks at t and 1/2, so
    Gauss-Legendre panels split at those points are exact.
    """
    breaks = sorted({0.0, 0.5, float(t), 1.0})
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            x, w = _panel(a, b, 8)
            total += float(np.sum(w * kappa(x, t)))
    return total


def double_int_kappa():
    """Double integral of kappa over the unit square by iterated quadrature."""
    total = 0.0
    for a, b in ((0.0, 0.5), (0.5, 1.0)):
        x, w = _panel(a, b, 24)
        inner = np.array([int_kappa_du(t) for t in x])
        total += float(np.sum(w * inner))
    return total


def quad_mixture_discrepancy_sq(points):
    """Squared mixture discrepancy straight from the kernel definition.

    Evaluates the constant, cross and pairwise terms of the discrepancy
    double integral numerically (tensor-product Gauss-Legendre per
    coordinate), without the analytic closed-form constants.
    """
    points = np.asarray(points, dtype=np.float64)
    m, q = points.shape
    a0 = double_int_kappa()
    term1 = a0 ** q
    term2 = 0.0
    for j in range(m):
        prod = 1.0
        for d in range(q):
            prod *= int_kappa_du(points[j, d])
        term2 += prod
    term2 *= 2.0 / m
    term3 = 0.0
    for j in range(m):
        for k in range(m):
            prod = 1.0
            for d in range(q):
                prod *= float(kappa(points[j, d], points[k, d]))
            term3 += prod
    term3 /= m * m
    return term1 - term2 + term3


def gefd_sq_brute_force(selected_u, full_u):
    """Triple-loop GEFD on already ECDF-transformed point sets."""
    n, q = full_u.shape
    m = selected_u.shape[0]

    def ksum(A, B):
        total = 0.0
        for j in range(A.shape[0]):
            for k in range(B.shape[0]):
                prod = 1.0
                for d in range(q):
                    prod *= float(kappa(A[j, d], B[k, d]))
                total += prod
        return total

    return (ksum(full_u, full_u) / (n * n)
            - 2.0 * ksum(full_u, selected_u) / (n * m)
            + ksum(selected_u, selected_u) / (m * m))


def knn_scan(points, row_ids, query, k):
    """Exhaustive k-nearest-neighbour scan ordered by (distance, row id)."""
    diff = points - query
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    order = np.lexsort((row_ids, dist))[:k]
    return dist[order], order


def greedy_match_scan(Z, W, anchors):
    """Availability-aware greedy matching by linear scan, per arm.

    Returns dict arm -> (row ids, distances) in anchor order. Ties on
    distance resolve to the lower dataset row id.
    """
    out = {}
    for arm in (1, 0):
        rows = np.nonzero(np.asarray(W) == arm)[0]
        pts = Z[rows]
        taken = np.zeros(rows.size, dtype=bool)
        ids = np.empty(anchors.shape[0], dtype=np.int64)
        dists = np.empty(anchors.shape[0])
        for j, anchor in enumerate(anchors):
            diff = pts - anchor
            dist = np.sqrt(np.sum(diff * diff, axis=1))
            best = None
            best_i = -1
            for i in range(rows.size):
                if taken[i]:
                    continue
                cand = (dist[i], rows[i])
                if best is None or cand < best:
                    best = cand
                    best_i = i
            taken[best_i] = True
            ids[j] = rows[best_i]
            dists[j] = best[0]
        out[arm] = (ids, dists)
    return out
