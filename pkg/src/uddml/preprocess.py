"""Covariate standardisation, PCA rotation and marginal ECDF transforms.

The rotation standardises each covariate (sample sd, ddof=1; zero-variance
columns get scale 1), keeps the smallest number of principal directions whose
cumulative variance share reaches the requested threshold, and fits one
empirical CDF per retained rotated coordinate. Skeleton points in the unit
cube are later mapped onto observed rotated values through the type-1
generalized inverse of these ECDFs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PreconditionError

# Above this row count the rotation is computed from the p x p correlation
# matrix instead of a direct SVD; the retained subspace is identical.
_GRAM_ROWS = 10_000


@dataclass(frozen=True)
class RotatedSpace:
    """Fitted standardisation + rotation and per-coordinate ECDFs.

    Immutable after fitting; safe for concurrent use.
    """

    mean: np.ndarray            # (p,)
    scale: np.ndarray           # (p,), strictly positive
    loadings: np.ndarray        # (p, q), orthonormal columns
    q: int
    explained_fraction: float
    ecdf_values: np.ndarray     # (q, n), each row sorted ascending

    @property
    def n_fitted(self):
        return self.ecdf_values.shape[1]


def fit_rotation(X, rho0):
    """Fit the rotated space on an n x p covariate matrix.

    ``rho0`` in (0, 1) is the cumulative variance share that the retained
    dimension q must reach; q is the smallest such integer. Loading columns
    carry a deterministic sign (largest-magnitude entry positive).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise InvalidInputError("X must be a 2-D matrix with at least one column")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("X contains non-finite values")
    if not 0.0 < rho0 < 1.0:
        raise InvalidInputError(f"rho0 must lie in (0, 1), got {rho0}")
    n, p = X.shape
    if n < 2:
        raise PreconditionError(f"need at least 2 rows to fit a rotation, got {n}")

    mean = X.mean(axis=0)
    scale = X.std(axis=0, ddof=1)
    scale = np.where(scale > 0.0, scale, 1.0)
    Xs = (X - mean) / scale

    if n <= _GRAM_ROWS:
        _, svals, vt = np.linalg.svd(Xs, full_matrices=False)
        variances = svals * svals
        vectors = vt.T
    else:
        corr = (Xs.T @ Xs) / (n - 1)
        evals, evecs = np.linalg.eigh(corr)
        order = np.argsort(evals)[::-1]
        variances = np.maximum(evals[order], 0.0)
        vectors = evecs[:, order]

    total = variances.sum()
    if total <= 0.0:
        raise PreconditionError("all covariates are constant; nothing to rotate")
    shares = np.cumsum(variances) / total
    q = int(np.searchsorted(shares, rho0, side="left")) + 1
    q = min(q, p)

    loadings = vectors[:, :q].copy()
    for d in range(q):
        col = loadings[:, d]
        if col[np.argmax(np.abs(col))] < 0:
            loadings[:, d] = -col

    Z = Xs @ loadings
    ecdf_values = np.sort(Z, axis=0).T.copy()
    return RotatedSpace(
        mean=mean,
        scale=scale,
        loadings=loadings,
        q=q,
        explained_fraction=float(shares[q - 1]),
        ecdf_values=ecdf_values,
    )


def rotate(space, X):
    """Map rows of X into the retained rotated coordinates."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != space.mean.shape[0]:
        raise InvalidInputError(
            f"X has {X.shape[1]} columns, rotation was fitted with "
            f"{space.mean.shape[0]}")
    Z = ((X - space.mean) / space.scale) @ space.loadings
    return Z[0] if single else Z


def ecdf_forward(space, z):
    """Per-coordinate ECDF of rotated points: share of fitted values <= z.

    Accepts a single q-vector or an (m, q) matrix.
    """
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    if z.shape[1] != space.q:
        raise InvalidInputError(f"expected {space.q} coordinates, got {z.shape[1]}")
    n = space.n_fitted
    out = np.empty_like(z)
    for d in range(space.q):
        out[:, d] = np.searchsorted(space.ecdf_values[d], z[:, d],
                                    side="right") / n
    return out[0] if single else out


def ecdf_inverse(space, u):
    """Type-1 generalized inverse of the per-coordinate ECDFs.

    Coordinate d maps to the smallest fitted order statistic whose ECDF value
    is >= u_d; u_d = 0 maps to the minimum. Accepts a vector or a matrix.
    """
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim == 1
    if single:
        u = u[None, :]
    if u.shape[1] != space.q:
        raise InvalidInputError(f"expected {space.q} coordinates, got {u.shape[1]}")
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise InvalidInputError("u must lie in [0, 1]")
    n = space.n_fitted
    grid = np.arange(1, n + 1) / n
    out = np.empty_like(u)
    for d in range(space.q):
        idx = np.searchsorted(grid, u[:, d], side="left")
        out[:, d] = space.ecdf_values[d][np.minimum(idx, n - 1)]
    return out[0] if single else out
