"""Small gradient-boosted tree learners built on the tree kernels.

Exact greedy splits (no histograms), best-first growth capped by depth and
leaf count, Newton leaf values. The four headline hyperparameters (rounds,
max depth, learning rate, max leaves) match the reference configuration used
throughout the experiments; the remaining knobs are conservative fixed
defaults.
"""

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import InvalidInputError


def _presort(X):
    order = np.argsort(X, axis=0, kind="stable")
    return np.ascontiguousarray(order.T.astype(np.int64))


class _BoostedTreesBase:
    def __init__(self, rounds=100, max_depth=5, learning_rate=0.1,
                 max_leaves=31, min_samples_leaf=20, min_hessian=1e-3,
                 reg_lambda=0.0):
        if min(rounds, max_depth, max_leaves) < 1 or learning_rate <= 0:
            raise InvalidInputError("boosting hyperparameters must be positive")
        self.rounds = rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.min_samples_leaf = min_samples_leaf
        self.min_hessian = min_hessian
        self.reg_lambda = reg_lambda
        self._trees = None
        self._base = 0.0
        self.train_losses_ = None

    def _boost(self, X, grad_hess_fn, base, loss_fn):
        """Run the boosting loop; grad_hess_fn maps raw scores to (g, h)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        m = X.shape[0]
        order = _presort(X)
        raw = np.full(m, base, dtype=np.float64)
        trees = []
        losses = [loss_fn(raw)]
        for _ in range(self.rounds):
            grad, hess = grad_hess_fn(raw)
            feat, thr, left, right, value, _, leaf_of_row = kernels.grow_tree(
                X, order, grad, hess, self.max_depth, self.max_leaves,
                self.min_samples_leaf, self.min_hessian, self.reg_lambda)
            raw += self.learning_rate * value[leaf_of_row]
            trees.append((feat, thr, left, right, value))
            losses.append(loss_fn(raw))
        self._trees = trees
        self._base = base
        self.train_losses_ = np.array(losses)
        return raw

    def _predict_raw(self, X):
        if self._trees is None:
            raise InvalidInputError("learner is not fitted")
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self._base, dtype=np.float64)
        for feat, thr, left, right, value in self._trees:
            out += self.learning_rate * kernels.tree_predict(
                X, feat, thr, left, right, value)
        return out


class BoostedTreesRegressor(_BoostedTreesBase):
    """Squared-error gradient boosting."""

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.float64)
        base = float(y.mean())

        def grad_hess(raw):
            return raw - y, np.ones_like(raw)

        def loss(raw):
            return float(np.mean((raw - y) ** 2))

        self._boost(X, grad_hess, base, loss)
        return self

    def predict(self, X):
        return self._predict_raw(X)


class BoostedTreesClassifier:
    """Log-loss Newton boosting for binary labels."""

    def __init__(self, **kwargs):
        self._impl = _BoostedTreesBase(**kwargs)
        self.train_losses_ = None

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.float64)
        pbar = min(max(float(y.mean()), 1e-12), 1.0 - 1e-12)
        base = float(np.log(pbar / (1.0 - pbar)))

        def grad_hess(raw):
            prob = expit(raw)
            return prob - y, prob * (1.0 - prob)

        def loss(raw):
            return float(np.mean(np.logaddexp(0.0, raw) - y * raw))

        self._impl._boost(X, grad_hess, base, loss)
        self.train_losses_ = self._impl.train_losses_
        return self

    def predict_raw(self, X):
        return self._impl._predict_raw(X)

    def predict_proba(self, X):
        return expit(self.predict_raw(X))
