"""Backend parity: the numba kernels and the pure-numpy fallbacks agree."""

import subprocess
import sys

import numpy as np
import pytest

from uddml.kernels import numba_impl, numpy_impl


def _random_tree_task(rng, m, p, with_ties=False):
    X = rng.normal(size=(m, p))
    if with_ties:
        X[:, p // 2] = rng.integers(0, 3, size=m)
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1 % p] + 0.3 * rng.normal(size=m)
    grad = -(y - y.mean())
    hess = rng.uniform(0.5, 1.5, size=m)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T
                                 .astype(np.int64))
    return X, order, grad, hess


def test_pairwise_sums_match():
    rng = np.random.default_rng(11)
    for _ in range(8):
        U = rng.random((int(rng.integers(1, 80)), int(rng.integers(1, 6))))
        V = rng.random((int(rng.integers(1, 80)), U.shape[1]))
        assert numpy_impl.kernel_cross_sum(U, V) == pytest.approx(
            numba_impl.kernel_cross_sum(U, V), rel=1e-12)
        assert numpy_impl.kernel_self_sum(U) == pytest.approx(
            numba_impl.kernel_self_sum(U), rel=1e-12)
        assert numpy_impl.a1_product_sum(U) == pytest.approx(
            numba_impl.a1_product_sum(U), rel=1e-12)


def test_self_sum_equals_cross_sum_with_itself():
    rng = np.random.default_rng(3)
    U = rng.random((40, 3))
    for impl in (numpy_impl, numba_impl):
        assert impl.kernel_self_sum(U) == pytest.approx(
            impl.kernel_cross_sum(U, U), rel=1e-12)


def test_grow_tree_identical_structures():
    rng = np.random.default_rng(5)
    for trial in range(8):
        m = int(rng.integers(40, 500))
        p = int(rng.integers(2, 8))
        X, order, grad, hess = _random_tree_task(rng, m, p,
                                                 with_ties=trial % 2 == 0)
        res_np = numpy_impl.grow_tree(X, order, grad, hess, 5, 31, 5, 1e-3, 0.0)
        res_nb = numba_impl.grow_tree(X, order, grad, hess, 5, 31, 5, 1e-3, 0.0)
        for a, b in zip(res_np[:5], res_nb[:5]):
            assert np.array_equal(a, b)
        assert res_np[5] == res_nb[5]
        assert np.array_equal(res_np[6], res_nb[6])
        Xq = rng.normal(size=(100, p))
        assert np.array_equal(numpy_impl.tree_predict(Xq, *res_np[:5]),
                              numba_impl.tree_predict(Xq, *res_nb[:5]))


def test_leaf_map_matches_tree_predict():
    rng = np.random.default_rng(9)
    X, order, grad, hess = _random_tree_task(rng, 200, 4)
    for impl in (numpy_impl, numba_impl):
        feat, thr, left, right, value, _, leaf_of_row = impl.grow_tree(
            X, order, grad, hess, 4, 15, 5, 1e-3, 0.0)
        assert np.array_equal(value[leaf_of_row],
                              impl.tree_predict(X, feat, thr, left, right,
                                                value))


def test_env_flag_selects_backend():
    code = ("import uddml.kernels as k; print(k.ACTIVE_BACKEND)")
    for flag, expected in (("numpy", "numpy"), ("numba", "numba")):
        out = subprocess.run([sys.executable, "-c", code],
                             env={"PATH": "/usr/bin:/bin",
                                  "UDDML_BACKEND": flag},
                             capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == expected


def test_env_flag_rejects_unknown_value():
    code = "import uddml.kernels"
    out = subprocess.run([sys.executable, "-c", code],
                         env={"PATH": "/usr/bin:/bin",
                              "UDDML_BACKEND": "cuda"},
                         capture_output=True, text=True)
    assert out.returncode != 0
    assert "UDDML_BACKEND" in out.stderr
