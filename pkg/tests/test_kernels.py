import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from _helpers import fd_stein
from mmdquant.exceptions import ConfigurationError, DataError, DegenerateDataError
from mmdquant.kernels import (
    KernelSpec, SteinKernel, cross_matrix, diagonal, evaluate, gram, median_heuristic, stein_evaluate,
)


def test_se_examples():
    se = KernelSpec("se", 0.25)
    assert evaluate(se, [1.0, 2.0], [1.0, 2.0]) == 1.0
    assert evaluate(se, [0.0], [0.25]) == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_imq_example():
    imq = KernelSpec("imq", 1.0)
    assert evaluate(imq, [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]) == pytest.approx(0.5, abs=1e-15)


def test_aliases_and_validation():
    assert KernelSpec("se").family == "squared_exponential"
    assert KernelSpec("imq").family == "inverse_multiquadric"
    with pytest.raises(ConfigurationError):
        KernelSpec("matern", 1.0)
    for bad in (0.0, -1.0, float("inf"), float("nan")):
        with pytest.raises(ConfigurationError):
            KernelSpec("se", bad)


def test_dimension_mismatch():
    with pytest.raises(DataError):
        evaluate(KernelSpec("se"), [0.0, 1.0], [0.0])


@pytest.mark.parametrize("family", ["se", "imq"])
def test_symmetry_is_exact(family):
    rng = np.random.default_rng(0)
    k = KernelSpec(family, 0.7)
    st = SteinKernel(k)
    for _ in range(50):
        x, y, ux, uy = rng.standard_normal((4, 3))
        assert evaluate(k, x, y) == evaluate(k, y, x)
        assert stein_evaluate(st, x, ux, y, uy) == stein_evaluate(st, y, uy, x, ux)


def test_stein_imq_standard_gaussian_origin():
    st = SteinKernel(KernelSpec("imq", 1.0))
    x = np.zeros(2)
    assert stein_evaluate(st, x, -x, x, -x) == pytest.approx(2.0, abs=1e-12)
    assert fd_stein(st.base, x, -x, x, -x) == pytest.approx(2.0, abs=1e-5)


@pytest.mark.parametrize("d", [1, 2, 5])
def test_stein_se_zero_score_diagonal(d):
    st = SteinKernel(KernelSpec("se", 1.0))
    x = np.linspace(-1, 1, d)
    assert stein_evaluate(st, x, np.zeros(d), x, np.zeros(d)) == pytest.approx(d, abs=1e-12)


@pytest.mark.parametrize("family", ["se", "imq"])
@pytest.mark.parametrize("d", [1, 2, 5])
def test_stein_matches_finite_differences(family, d):
    rng = np.random.default_rng(d)
    st = SteinKernel(KernelSpec(family, rng.uniform(0.5, 2.0)))
    worst = 0.0
    for _ in range(30):
        x, y, ux, uy = rng.standard_normal((4, d))
        worst = max(worst, abs(stein_evaluate(st, x, ux, y, uy) - fd_stein(st.base, x, ux, y, uy)))
    assert worst <= 1e-5


@pytest.mark.parametrize("family", ["se", "imq"])
def test_gram_matches_double_loop(family):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((5, 3))
    k = KernelSpec(family, 0.8)
    G = gram(k, X)
    loop = np.array([[evaluate(k, a, b) for b in X] for a in X])
    np.testing.assert_array_equal(G, loop)
    U = rng.standard_normal((5, 3))
    st = SteinKernel(k)
    G = gram(st, X, U)
    loop = np.array([[stein_evaluate(st, X[i], U[i], X[j], U[j]) for j in range(5)] for i in range(5)])
    np.testing.assert_array_equal(G, loop)
    np.testing.assert_array_equal(np.diag(G), diagonal(st, X, U))


def test_gram_small_cases():
    G = gram(KernelSpec("se", 0.3), np.random.default_rng(0).standard_normal((7, 2)))
    assert np.all(np.diag(G) == 1.0)
    assert gram(KernelSpec("imq", 2.0), [[1.0, 2.0]]).shape == (1, 1)


@pytest.mark.parametrize("family", ["se", "imq"])
@pytest.mark.parametrize("stein", [False, True])
def test_gram_psd(family, stein):
    rng = np.random.default_rng(11)
    for n in (5, 20, 50):
        X = rng.standard_normal((n, 2))
        k = KernelSpec(family, rng.uniform(0.3, 2.0))
        G = gram(SteinKernel(k), X, -X) if stein else gram(k, X)
        assert np.linalg.eigvalsh(G).min() >= -1e-8


def test_cross_matrix_shape():
    rng = np.random.default_rng(0)
    k = KernelSpec("se", 1.0)
    C = cross_matrix(k, rng.standard_normal((4, 2)), rng.standard_normal((6, 2)))
    assert C.shape == (4, 6)


def test_median_heuristic_examples():
    assert median_heuristic([[0.0, 0.0], [2.0, 0.0]]) == pytest.approx(math.sqrt(2.0))
    with pytest.raises(DegenerateDataError):
        median_heuristic(np.ones((10, 2)))
    with pytest.raises(DataError):
        median_heuristic([[0.0, 1.0]])


def test_median_heuristic_full_pairs_and_determinism():
    X = np.random.default_rng(5).standard_normal((1000, 2))
    brute = math.sqrt(0.5 * np.median(pdist(X, "sqeuclidean")))
    assert median_heuristic(X, subsample=1000) == brute
    Y = np.random.default_rng(6).standard_normal((3000, 2))
    assert median_heuristic(Y, seed=4) == median_heuristic(Y, seed=4)
