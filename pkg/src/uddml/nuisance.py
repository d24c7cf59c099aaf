"""Nuisance learners: outcome regressions m0/m1 and the propensity score e.

Three learner families are available for each role: the boosted trees from
``uddml.trees`` (the default, mirroring the reference configuration of 100
rounds / depth 5 / learning rate 0.1 / 31 leaves), ridge-regularised linear
or Newton logistic models on the full covariates, and deliberately
misspecified variants restricted to covariate 5 plus an intercept (used by
the double-robustness experiments). Propensity predictions are clipped to
[clip_low, clip_high].
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import InvalidInputError, PreconditionError
from .trees import BoostedTreesClassifier, BoostedTreesRegressor

OUTCOME_LEARNERS = ("boosted_trees", "linear", "linear_on_x5")
PROPENSITY_LEARNERS = ("boosted_trees", "logistic", "logistic_on_x5")

# ridge strength on non-intercept coefficients; guards singular designs
_RIDGE = 1e-6
# 1-based covariate index used by the misspecified learners
_MISSPEC_COLUMN = 5


@dataclass(frozen=True)
class BoostingParams:
    rounds: int = 100
    max_depth: int = 5
    learning_rate: float = 0.1
    max_leaves: int = 31

    def __post_init__(self):
        if (min(self.rounds, self.max_depth, self.max_leaves) < 1
                or self.learning_rate <= 0):
            raise InvalidInputError("boosting hyperparameters must be positive")


@dataclass(frozen=True)
class NuisanceConfig:
    outcome_learner: str = "boosted_trees"
    propensity_learner: str = "boosted_trees"
    boosting: BoostingParams = field(default_factory=BoostingParams)
    clip_low: float = 0.01
    clip_high: float = 0.99

    def __post_init__(self):
        if self.outcome_learner not in OUTCOME_LEARNERS:
            raise InvalidInputError(
                f"unknown outcome learner {self.outcome_learner!r}")
        if self.propensity_learner not in PROPENSITY_LEARNERS:
            raise InvalidInputError(
                f"unknown propensity learner {self.propensity_learner!r}")
        if not 0.0 < self.clip_low < self.clip_high < 1.0:
            raise InvalidInputError("need 0 < clip_low < clip_high < 1")


@dataclass(frozen=True)
class FittedNuisance:
    """Fold-level fitted predictors; pure functions of their training data."""

    m0: object   # callable X -> outcome prediction
    m1: object
    e: object    # callable X -> raw probability (pre-clipping)
    clip_low: float
    clip_high: float

    def predict_m0(self, X):
        return self.m0(X)

    def predict_m1(self, X):
        return self.m1(X)


def _add_intercept(X):
    return np.column_stack((np.ones(X.shape[0]), X))


class RidgeLinear:
    """Least squares with an intercept and a tiny ridge on slopes."""

    def __init__(self, ridge=_RIDGE):
        self.ridge = ridge
        self.coef = None

    def fit(self, X, y):
        A = _add_intercept(np.asarray(X, dtype=np.float64))
        penalty = np.full(A.shape[1], self.ridge)
        penalty[0] = 0.0
        self.coef = np.linalg.solve(A.T @ A + np.diag(penalty), A.T @ y)
        return self

    def predict(self, X):
        return _add_intercept(np.asarray(X, dtype=np.float64)) @ self.coef


def logistic_nll_grad(beta, A, y, ridge=_RIDGE):
    """Negative log-likelihood (plus ridge on slopes) and its gradient."""
    z = A @ beta
    # log(1 + exp(z)) - y z, computed stably
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    slopes = beta.copy()
    slopes[0] = 0.0
    nll += 0.5 * ridge * float(slopes @ slopes)
    grad = A.T @ (expit(z) - y) + ridge * slopes
    return nll, grad


class LogisticNewton:
    """Logistic regression by damped Newton iterations.

    Stops when the gradient norm drops below 1e-8 (or after 100 iterations);
    steps are halved while they fail to reduce the objective.
    """

    def __init__(self, ridge=_RIDGE, tol=1e-8, max_iter=100):
        self.ridge = ridge
        self.tol = tol
        self.max_iter = max_iter
        self.coef = None

    def fit(self, X, y):
        A = _add_intercept(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64)
        beta = np.zeros(A.shape[1])
        nll, grad = logistic_nll_grad(beta, A, y, self.ridge)
        for _ in range(self.max_iter):
            if np.linalg.norm(grad) < self.tol:
                break
            prob = expit(A @ beta)
            w = prob * (1.0 - prob)
            hess = (A.T * w) @ A
            hess[np.arange(1, A.shape[1]), np.arange(1, A.shape[1])] += self.ridge
            hess[np.arange(A.shape[1]), np.arange(A.shape[1])] += 1e-10
            step = np.linalg.solve(hess, grad)
            scale = 1.0
            for _ in range(30):
                cand = beta - scale * step
                cand_nll, cand_grad = logistic_nll_grad(cand, A, y, self.ridge)
                if cand_nll <= nll:
                    break
                scale *= 0.5
            beta, nll, grad = cand, cand_nll, cand_grad
        self.coef = beta
        return self

    def predict_proba(self, X):
        A = _add_intercept(np.asarray(X, dtype=np.float64))
        return expit(A @ self.coef)


def _misspec_column(X):
    if X.shape[1] < _MISSPEC_COLUMN:
        raise InvalidInputError(
            f"misspecified learners need at least {_MISSPEC_COLUMN} covariates")
    return X[:, [_MISSPEC_COLUMN - 1]]


def _fit_outcome(X, y, config):
    kind = config.outcome_learner
    if kind == "boosted_trees":
        b = config.boosting
        model = BoostedTreesRegressor(
            rounds=b.rounds, max_depth=b.max_depth,
            learning_rate=b.learning_rate, max_leaves=b.max_leaves).fit(X, y)
        return model.predict
    if kind == "linear":
        model = RidgeLinear().fit(X, y)
        return model.predict
    model = RidgeLinear().fit(_misspec_column(X), y)
    return lambda Xnew: model.predict(_misspec_column(Xnew))


def _fit_propensity(X, w, config):
    kind = config.propensity_learner
    if kind == "boosted_trees":
        b = config.boosting
        model = BoostedTreesClassifier(
            rounds=b.rounds, max_depth=b.max_depth,
            learning_rate=b.learning_rate, max_leaves=b.max_leaves).fit(X, w)
        return model.predict_proba
    if kind == "logistic":
        model = LogisticNewton().fit(X, w)
        return model.predict_proba
    model = LogisticNewton().fit(_misspec_column(X), w)
    return lambda Xnew: model.predict_proba(_misspec_column(Xnew))


def fit_nuisance(train, config):
    """Fit m1 on treated rows, m0 on control rows, e on all rows."""
    X = np.asarray(train.X, dtype=np.float64)
    Y = np.asarray(train.Y, dtype=np.float64)
    W = np.asarray(train.W)
    treated = W == 1
    if not treated.any() or treated.all():
        raise PreconditionError("training data must contain both arms")
    m1 = _fit_outcome(X[treated], Y[treated], config)
    m0 = _fit_outcome(X[~treated], Y[~treated], config)
    e = _fit_propensity(X, W.astype(np.float64), config)
    return FittedNuisance(m0=m0, m1=m1, e=e,
                          clip_low=config.clip_low, clip_high=config.clip_high)


def predict_propensity(fitted, X):
    """Propensity predictions clamped into [clip_low, clip_high]."""
    raw = np.asarray(fitted.e(X), dtype=np.float64)
    return np.clip(raw, fitted.clip_low, fitted.clip_high)
