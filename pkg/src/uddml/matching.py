"""Per-arm spatial indexes and paired nearest-neighbour selection.

Each treatment arm gets an exact KD-tree (median split, leaf size 16) over
the rotated covariates. Anchors are processed in design order; for each one
the nearest still-available unit in each arm is taken (without replacement),
with candidate lists expanded adaptively (k doubling from 4) until the chosen
unit is certain, i.e. no unreturned unit could be closer or tie it. Distance
ties break on the lower dataset row id.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, PreconditionError

_INITIAL_K = 4
_LEAF_SIZE = 16


@dataclass(frozen=True)
class SubsampleSelection:
    """Matched treated/control row ids with per-anchor distances."""

    treated_indices: np.ndarray   # (r_p,) dataset row ids, W = 1
    control_indices: np.ndarray   # (r_p,) dataset row ids, W = 0
    dist_treated: np.ndarray      # (r_p,) rotated-space distances
    dist_control: np.ndarray
    radius_treated: float         # max of dist_treated
    radius_control: float

    @property
    def indices(self):
        """All selected row ids, treated first (size 2 r_p)."""
        return np.concatenate((self.treated_indices, self.control_indices))

    def anchor_of(self, j):
        """(treated id, control id) matched to anchor j."""
        return int(self.treated_indices[j]), int(self.control_indices[j])


class ArmIndex:
    """Exact nearest-neighbour index over one arm's rotated covariates.

    Immutable after construction; queries return candidates sorted by
    (distance, dataset row id) with distances recomputed in plain
    coordinate order so they match a linear-scan oracle bit for bit.
    """

    def __init__(self, points, row_ids, arm):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.row_ids = np.asarray(row_ids, dtype=np.int64)
        self.arm = arm
        self.size = self.points.shape[0]
        self._tree = cKDTree(self.points, leafsize=_LEAF_SIZE,
                             balanced_tree=True)

    def query(self, point, k):
        """k nearest units, ordered by (distance, row id)."""
        k = min(max(int(k), 1), self.size)
        _, loc = self._tree.query(point, k=k)
        loc = np.atleast_1d(loc)
        diff = self.points[loc] - point
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        order = np.lexsort((self.row_ids[loc], dist))
        return dist[order], loc[order]


def build_arm_index(Z, W, arm):
    """Index the rows of Z belonging to one treatment arm."""
    Z = np.asarray(Z, dtype=np.float64)
    W = np.asarray(W)
    rows = np.nonzero(W == arm)[0]
    if rows.size == 0:
        raise PreconditionError(f"arm {arm} has no observations")
    return ArmIndex(Z[rows], rows, arm)


def _match_arm(index, anchors, r_p):
    """Greedy without-replacement matching of anchors to one arm."""
    taken = np.zeros(index.size, dtype=bool)
    chosen = np.empty(r_p, dtype=np.int64)
    dist_out = np.empty(r_p, dtype=np.float64)
    # one batched pass covers the common no-collision case
    k0 = min(_INITIAL_K, index.size)
    _, loc0 = index._tree.query(anchors, k=k0)
    loc0 = loc0.reshape(r_p, k0)
    for j in range(r_p):
        anchor = anchors[j]
        loc = loc0[j]
        diff = index.points[loc] - anchor
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        order = np.lexsort((index.row_ids[loc], dist))
        dist, loc = dist[order], loc[order]
        k = k0
        while True:
            pick = -1
            for i in range(loc.size):
                if not taken[loc[i]]:
                    pick = i
                    break
            certain = k >= index.size or (pick >= 0 and dist[pick] < dist[-1])
            if certain and pick >= 0:
                taken[loc[pick]] = True
                chosen[j] = index.row_ids[loc[pick]]
                dist_out[j] = dist[pick]
                break
            k = min(2 * k, index.size)
            dist, loc = index.query(anchor, k)
    return chosen, dist_out


def select_pairs(Z, W, anchors):
    """Match every anchor to its nearest available treated and control unit.

    Anchors are processed in order j = 1..r_p; each arm needs at least r_p
    observations so the without-replacement selection always completes.
    """
    Z = np.asarray(Z, dtype=np.float64)
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    if anchors.shape[1] != Z.shape[1]:
        raise InvalidInputError(
            f"anchors have {anchors.shape[1]} coordinates, Z has {Z.shape[1]}")
    r_p = anchors.shape[0]
    treated = build_arm_index(Z, W, 1)
    control = build_arm_index(Z, W, 0)
    for index in (treated, control):
        if index.size < r_p:
            raise PreconditionError(
                f"arm {index.arm} has {index.size} observations, fewer than "
                f"r_p={r_p}; cannot match without replacement")
    t_ids, t_dist = _match_arm(treated, anchors, r_p)
    c_ids, c_dist = _match_arm(control, anchors, r_p)
    return SubsampleSelection(
        treated_indices=t_ids,
        control_indices=c_ids,
        dist_treated=t_dist,
        dist_control=c_dist,
        radius_treated=float(t_dist.max()),
        radius_control=float(c_dist.max()),
    )


def standardized_mean_differences(dataset, selection):
    """Covariate-wise SMD between the selected treated and control rows.

    Pooled sd is sqrt((s1^2 + s0^2)/2) with ddof=1; coordinates with zero
    pooled sd report 0.
    """
    X1 = dataset.X[selection.treated_indices]
    X0 = dataset.X[selection.control_indices]
    v1 = X1.var(axis=0, ddof=1) if X1.shape[0] > 1 else np.zeros(X1.shape[1])
    v0 = X0.var(axis=0, ddof=1) if X0.shape[0] > 1 else np.zeros(X0.shape[1])
    pooled = np.sqrt((v1 + v0) / 2.0)
    diff = X1.mean(axis=0) - X0.mean(axis=0)
    out = np.zeros_like(diff)
    ok = pooled > 0.0
    out[ok] = diff[ok] / pooled[ok]
    return out
