"""Seedable simulators for the three observational scenarios.

All scenarios share p = 10 covariates, outcome Y = g(X) + W * cate(X) + eps
with standard normal noise, logistic treatment assignment, and a true average
effect of exactly 1.0. Draws come from counter-based Philox generators with
one substream per column (SeedSequence spawn keys), so enlarging n extends a
dataset row-wise instead of reshuffling it; nested-n experiments rely on
this coupling.
"""

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit

from .errors import InvalidInputError

SCENARIOS = ("OBS1", "OBS2", "OBS3", "OBS3_overlap")
P_COVARIATES = 10
THETA0 = 1.0

# substream tags: 0..9 covariate columns, then auxiliary draws
_TAG_MIXTURE = 10
_TAG_TREATMENT = 11
_TAG_NOISE = 12

_TRUTH_COLUMNS = ("true_e0", "true_m0", "true_m1", "true_cate")


@dataclass(frozen=True)
class DgpSpec:
    scenario: str
    n: int
    overlap_c: float = 1.0   # used by OBS3_overlap only

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidInputError(f"unknown scenario {self.scenario!r}")
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        if self.overlap_c < 0:
            raise InvalidInputError("overlap multiplier must be >= 0")


@dataclass(frozen=True)
class Dataset:
    Y: np.ndarray
    W: np.ndarray
    X: np.ndarray
    e0: np.ndarray = None
    m0: np.ndarray = None
    m1: np.ndarray = None
    cate: np.ndarray = None

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def has_truth(self):
        return self.e0 is not None

    def take(self, indices):
        indices = np.asarray(indices, dtype=np.int64)

        def sub(a):
            return None if a is None else a[indices]

        return Dataset(Y=self.Y[indices], W=self.W[indices],
                       X=self.X[indices], e0=sub(self.e0), m0=sub(self.m0),
                       m1=sub(self.m1), cate=sub(self.cate))


def _stream(seed, tag):
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(tag,))
    return np.random.Generator(np.random.Philox(seq))


def _draw_covariates(spec, seed):
    n = spec.n
    X = np.empty((n, P_COVARIATES))
    if spec.scenario == "OBS1":
        for d in range(P_COVARIATES):
            X[:, d] = _stream(seed, d).uniform(-2.0, 2.0, n)
    elif spec.scenario == "OBS2":
        for d in range(5):
            X[:, d] = _stream(seed, d).uniform(-2.0, 2.0, n)
        for d in range(5, P_COVARIATES):
            X[:, d] = _stream(seed, d).normal(0.0, 1.5, n)
    else:
        # two sharply separated clusters on the first five coordinates
        sign = np.where(_stream(seed, _TAG_MIXTURE).random(n) < 0.5, -1.0, 1.0)
        means = np.zeros((n, 5))
        means[:, 0] = 2.0 * sign
        means[:, 1] = 2.0 * sign
        for d in range(5):
            X[:, d] = means[:, d] + 0.5 * _stream(seed, d).standard_normal(n)
        for d in range(5, P_COVARIATES):
            X[:, d] = _stream(seed, d).standard_normal(n)
    return X


def _surfaces(spec, X):
    """Baseline g, effect cate, and the propensity logit for a scenario."""
    x = X.T
    if spec.scenario == "OBS1":
        g = 0.5 * x[0] + 0.3 * x[1]
        cate = 1.0 + 0.2 * x[2]
        logit = 0.2 * x[0] - 0.2 * x[1]
    elif spec.scenario == "OBS2":
        g = 0.5 * x[0] ** 2 + 0.5 * x[1] * x[2] + np.sin(x[5])
        cate = 1.0 + 0.5 * x[0] * x[1]
        logit = (0.5 * x[0] - 0.3 * x[1] ** 2 + 0.4 * np.sin(x[5])
                 + 0.2 * x[6])
    else:
        g = (np.sin(np.pi * x[0]) + 0.5 * x[1] * x[2] + 0.1 * x[5] ** 3
             + 0.2 * np.cos(x[6]))
        cate = 1.0 + 0.5 * np.tanh(x[0]) + 0.2 * x[5] * x[6]
        logit = 0.3 * x[0] + 0.3 * x[1] - 0.5 * x[5]
        if spec.scenario == "OBS3_overlap":
            logit = spec.overlap_c * logit
    return g, cate, logit


def simulate(spec, seed):
    """Draw one dataset; pure function of (spec, seed)."""
    X = _draw_covariates(spec, seed)
    g, cate, logit = _surfaces(spec, X)
    e0 = expit(logit)
    W = (_stream(seed, _TAG_TREATMENT).random(spec.n) < e0).astype(np.int64)
    eps = _stream(seed, _TAG_NOISE).standard_normal(spec.n)
    Y = g + W * cate + eps
    return Dataset(Y=Y, W=W, X=X, e0=e0, m0=g, m1=g + cate, cate=cate)


def analytic_nuisance(spec, X):
    """Closed-form (e0, m0, m1) of a scenario at arbitrary covariates."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != P_COVARIATES:
        raise InvalidInputError(f"expected {P_COVARIATES} covariates")
    g, cate, logit = _surfaces(spec, X)
    return expit(logit), g, g + cate


def save_csv(dataset, path, include_truth=False):
    """Write Y,W,X1..Xp (optionally the true_* columns) as plain CSV."""
    p = dataset.X.shape[1]
    cols = [dataset.Y, dataset.W.astype(np.float64)]
    header = ["Y", "W"] + [f"X{d}" for d in range(1, p + 1)]
    cols.extend(dataset.X[:, d] for d in range(p))
    if include_truth:
        if not dataset.has_truth:
            raise InvalidInputError("dataset carries no truth columns")
        header += list(_TRUTH_COLUMNS)
        cols.extend([dataset.e0, dataset.m0, dataset.m1, dataset.cate])
    data = np.column_stack(cols)
    np.savetxt(path, data, fmt="%.17g", delimiter=",",
               header=",".join(header), comments="")
    return Path(path)


def load_csv(path):
    """Read a dataset written by save_csv (or any CSV with that schema)."""
    frame = pd.read_csv(path, float_precision="round_trip")
    for required in ("Y", "W"):
        if required not in frame.columns:
            raise InvalidInputError(f"input CSV is missing column {required!r}")
    xcols = []
    d = 1
    while f"X{d}" in frame.columns:
        xcols.append(f"X{d}")
        d += 1
    if not xcols:
        raise InvalidInputError("input CSV has no X1..Xp covariate columns")
    W = frame["W"].to_numpy()
    if not np.isin(W, (0, 1)).all():
        raise InvalidInputError("column W must be binary 0/1")
    X = frame[xcols].to_numpy(dtype=np.float64)
    Y = frame["Y"].to_numpy(dtype=np.float64)
    if not (np.isfinite(Y).all() and np.isfinite(X).all()):
        raise InvalidInputError("input CSV contains non-finite values")
    truth = {}
    if all(c in frame.columns for c in _TRUTH_COLUMNS):
        truth = {
            "e0": frame["true_e0"].to_numpy(dtype=np.float64),
            "m0": frame["true_m0"].to_numpy(dtype=np.float64),
            "m1": frame["true_m1"].to_numpy(dtype=np.float64),
            "cate": frame["true_cate"].to_numpy(dtype=np.float64),
        }
    return Dataset(Y=Y, W=W.astype(np.int64), X=X, **truth)


def with_overlap(spec, c):
    """The tunable-overlap variant of a spec (scenario forced accordingly)."""
    return replace(spec, scenario="OBS3_overlap", overlap_c=c)
