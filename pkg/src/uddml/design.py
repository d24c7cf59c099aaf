"""Good-lattice-point uniform designs under the mixture discrepancy.

Candidate designs come from power generators: an admissible generator gamma
(coprime with r_p + 1, with q distinct power residues) defines r_p points in
(0, 1)^q whose coordinates are permutations of the centred grid
(2k - 1)/(2 r_p). A budgeted random subset of admissible generators is scored
by the closed-form squared mixture discrepancy and the minimiser wins, ties
going to the smallest generator (discrepancies compared after rounding to 12
decimals so the tie rule is order-free).

Also provides the squared generalized empirical F-discrepancy of a point set
relative to a fitted dataset (a quadratic-cost diagnostic, meant for
desk-scale n), and a small JSON skeleton cache keyed by
(r_p, q, budget, seed) that stores the winning generator and re-derives the
points on load.
"""

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidInputError, PreconditionError
from .preprocess import ecdf_forward

CACHE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class UDSkeleton:
    """A selected uniform design: points in (0,1)^q plus search provenance."""

    points: np.ndarray        # (r_p, q)
    generator: int
    r_p: int
    q: int
    discrepancy_sq: float
    search_budget: int
    search_seed: int


def is_admissible(gamma, r_p, q):
    """True iff gcd(gamma, r_p+1) = 1 and the q power residues are distinct."""
    if gamma < 1 or r_p < 2 or q < 1:
        raise InvalidInputError("require gamma >= 1, r_p >= 2, q >= 1")
    modulus = r_p + 1
    if math.gcd(gamma, modulus) != 1:
        return False
    residues = {pow(gamma, d, modulus) for d in range(q)}
    return len(residues) == q


def admissible_generators(r_p, q):
    """All admissible generators in {1, ..., r_p}, ascending."""
    modulus = r_p + 1
    g = np.arange(1, r_p + 1, dtype=np.int64)
    ok = np.gcd(g, modulus) == 1
    if q > 1:
        res = np.empty((r_p, q), dtype=np.int64)
        res[:, 0] = 1
        for d in range(1, q):
            res[:, d] = (res[:, d - 1] * g) % modulus
        res.sort(axis=1)
        distinct = np.all(res[:, 1:] != res[:, :-1], axis=1)
        ok &= distinct
    return g[ok]


def build_candidate(gamma, r_p, q):
    """Points of the r_p-run q-factor design for one admissible generator."""
    if not is_admissible(gamma, r_p, q):
        raise InvalidInputError(
            f"generator {gamma} is inadmissible for r_p={r_p}, q={q}")
    modulus = r_p + 1
    gpow = np.array([pow(gamma, d, modulus) for d in range(q)], dtype=np.int64)
    j = np.arange(1, r_p + 1, dtype=np.int64)
    residues = (j[:, None] * gpow[None, :]) % modulus
    return residues / r_p - 1.0 / (2.0 * r_p)


def mixture_discrepancy_sq(points):
    """Closed-form squared mixture discrepancy of a point set in [0,1]^q."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise InvalidInputError("points must be an m x q matrix")
    if np.any(points < 0.0) or np.any(points > 1.0):
        raise InvalidInputError("point coordinates must lie in [0, 1]")
    m, q = points.shape
    term1 = (19.0 / 12.0) ** q
    term2 = (2.0 / m) * kernels.a1_product_sum(points)
    term3 = kernels.kernel_self_sum(points) / (m * m)
    return term1 - term2 + term3


def search_skeleton(r_p, q, budget, seed):
    """Pick the lowest-discrepancy candidate from a seeded generator subset.

    Enumerates admissible generators in {1, ..., r_p}, draws min(budget,
    count) of them without replacement, and returns the winner.
    """
    if r_p < 2:
        raise InvalidInputError(f"r_p must be >= 2, got {r_p}")
    if budget < 1:
        raise InvalidInputError(f"budget must be >= 1, got {budget}")
    gammas = admissible_generators(r_p, q)
    if gammas.size == 0:
        raise PreconditionError(
            f"no admissible generator exists for r_p={r_p}, q={q}; "
            f"choose a different r_p (r_p + 1 needs units of multiplicative "
            f"order >= q)")
    if gammas.size > budget:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        gammas = gammas[rng.permutation(gammas.size)[:budget]]
    best = None
    for gamma in sorted(int(g) for g in gammas):
        pts = build_candidate(gamma, r_p, q)
        d2 = mixture_discrepancy_sq(pts)
        key = (round(d2, 12), gamma)
        if best is None or key < best[0]:
            best = (key, gamma, pts, d2)
    _, gamma, pts, d2 = best
    return UDSkeleton(points=pts, generator=gamma, r_p=r_p, q=q,
                      discrepancy_sq=d2, search_budget=budget,
                      search_seed=seed)


def gefd_sq(selected, full_rotated, space):
    """Squared generalized empirical F-discrepancy of a rotated point set.

    Both point sets live in the rotated space of ``space``; they are pushed
    through the per-coordinate ECDFs and compared under the mixture kernel.
    Cost is quadratic in the larger set, so this is a desk-scale diagnostic.
    """
    selected = np.ascontiguousarray(selected, dtype=np.float64)
    full_rotated = np.ascontiguousarray(full_rotated, dtype=np.float64)
    if selected.ndim != 2 or full_rotated.ndim != 2:
        raise InvalidInputError("point sets must be 2-D")
    if selected.shape[1] != space.q or full_rotated.shape[1] != space.q:
        raise InvalidInputError(
            f"point sets must have q={space.q} coordinates")
    A = np.ascontiguousarray(ecdf_forward(space, full_rotated))
    B = np.ascontiguousarray(ecdf_forward(space, selected))
    n = A.shape[0]
    m = B.shape[0]
    s_nn = kernels.kernel_cross_sum(A, A)
    s_nm = kernels.kernel_cross_sum(A, B)
    s_mm = kernels.kernel_cross_sum(B, B)
    return s_nn / (n * n) - 2.0 * s_nm / (n * m) + s_mm / (m * m)


def _cache_path(cache_dir, r_p, q, budget, seed):
    return Path(cache_dir) / f"skeleton_rp{r_p}_q{q}_B{budget}_s{seed}.json"


def cache_store(skeleton, cache_dir):
    """Write a skeleton cache entry (atomic rename); returns the path."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = _cache_path(cache_dir, skeleton.r_p, skeleton.q,
                       skeleton.search_budget, skeleton.search_seed)
    payload = {
        "format_version": CACHE_FORMAT_VERSION,
        "r_p": skeleton.r_p,
        "q": skeleton.q,
        "budget": skeleton.search_budget,
        "seed": skeleton.search_seed,
        "generator": skeleton.generator,
        "discrepancy_sq": f"{skeleton.discrepancy_sq:.17g}",
    }
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, path)
    return path


def cache_lookup(r_p, q, budget, seed, cache_dir):
    """Load a cached skeleton, or None on miss/corruption/version change.

    Points are regenerated from the stored generator and the recomputed
    discrepancy is checked against the stored one before trusting the entry.
    """
    path = _cache_path(cache_dir, r_p, q, budget, seed)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    try:
        if payload["format_version"] != CACHE_FORMAT_VERSION:
            return None
        if (payload["r_p"], payload["q"], payload["budget"],
                payload["seed"]) != (r_p, q, budget, seed):
            return None
        gamma = int(payload["generator"])
        stored_d2 = float(payload["discrepancy_sq"])
        pts = build_candidate(gamma, r_p, q)
    except (KeyError, TypeError, ValueError, InvalidInputError):
        return None
    d2 = mixture_discrepancy_sq(pts)
    if abs(d2 - stored_d2) > 1e-9 * max(1.0, abs(stored_d2)):
        return None
    return UDSkeleton(points=pts, generator=gamma, r_p=r_p, q=q,
                      discrepancy_sq=d2, search_budget=budget,
                      search_seed=seed)


def skeleton_with_cache(r_p, q, budget, seed, cache_dir=None):
    """Cache-backed skeleton search; returns (skeleton, cache_hit)."""
    if cache_dir is not None:
        hit = cache_lookup(r_p, q, budget, seed, cache_dir)
        if hit is not None:
            return hit, True
    skeleton = search_skeleton(r_p, q, budget, seed)
    if cache_dir is not None:
        cache_store(skeleton, cache_dir)
    return skeleton, False
