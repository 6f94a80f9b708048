import math

import numpy as np
import pytest

from mmdquant import GaussianMixture, KernelSpec, ScoreTarget, SteinKernel, TargetModel, random_mixture
from mmdquant.exceptions import ConfigurationError, DataError
from mmdquant.target import double_integral, kernel_mean, score

SE1 = KernelSpec("se", 1.0)


def std_normal_1d():
    return TargetModel(GaussianMixture([1.0], [[0.0]], [[1.0]]))


def test_kernel_mean_standard_normal_monte_carlo():
    y = np.random.default_rng(0).standard_normal(10**6)
    vals = np.exp(-0.5 * y**2)
    se = vals.std(ddof=1) / math.sqrt(y.size)
    exact = kernel_mean(std_normal_1d(), SE1, [0.0])
    assert exact == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert abs(vals.mean() - exact) <= 3 * se


def test_double_integral_standard_normal_monte_carlo():
    rng = np.random.default_rng(1)
    y, yp = rng.standard_normal((2, 10**6))
    vals = np.exp(-0.5 * (y - yp) ** 2)
    se = vals.std(ddof=1) / math.sqrt(y.size)
    exact = double_integral(std_normal_1d(), SE1)
    assert exact == pytest.approx(math.sqrt(1 / 3), abs=1e-15)
    assert abs(vals.mean() - exact) <= 3 * se


def test_kernel_mean_point_mass_limit():
    t = TargetModel(GaussianMixture([1.0], [[0.0]], [[1e-12]]))
    assert kernel_mean(t, SE1, [2.0]) == pytest.approx(math.exp(-2.0), abs=1e-6)


def test_ksd_mode_is_exactly_zero():
    mix = random_mixture(3, 2, seed=0)
    t = TargetModel(mix, "ksd")
    st = SteinKernel(KernelSpec("imq", 1.0))
    assert kernel_mean(t, st, [0.3, -0.2]) == 0.0
    assert np.all(kernel_mean(t, st, np.ones((4, 2))) == 0.0)
    assert double_integral(t, st) == 0.0


def test_duplicate_components_match_single():
    one = TargetModel(GaussianMixture([1.0], [[0.5, 0.1]], [[0.3, 0.2]]))
    two = TargetModel(GaussianMixture([0.5, 0.5], [[0.5, 0.1]] * 2, [[0.3, 0.2]] * 2))
    k = KernelSpec("se", 0.7)
    assert double_integral(two, k) == pytest.approx(double_integral(one, k), rel=1e-14)


def test_pairing_errors_name_both():
    t = TargetModel(random_mixture(2, 2, seed=0))
    with pytest.raises(ConfigurationError, match="inverse_multiquadric"):
        kernel_mean(t, KernelSpec("imq", 1.0), [0.0, 0.0])
    with pytest.raises(ConfigurationError):
        double_integral(TargetModel(t.source, "ksd"), KernelSpec("se", 1.0))
    with pytest.raises(ConfigurationError):
        TargetModel(ScoreTarget(np.zeros((2, 1)), np.zeros((2, 1))), "mmd")


def test_gaussian_score():
    t = TargetModel(GaussianMixture([1.0], [[0.0, 0.0]], [[1.0, 1.0]]))
    np.testing.assert_allclose(score(t, [1.0, -2.0]), [-1.0, 2.0], atol=1e-15)


def test_symmetric_mixture_score_zero():
    t = TargetModel(GaussianMixture([0.5, 0.5], [[-1.3], [1.3]], [[1.0], [1.0]]))
    assert score(t, [0.0])[0] == pytest.approx(0.0, abs=1e-15)


def test_score_matches_finite_differences():
    mix = random_mixture(3, 2, seed=4, spread=1.0, var_range=(0.2, 0.6))
    rng = np.random.default_rng(2)
    h = 1e-5
    for x in rng.uniform(-1.5, 1.5, size=(100, 2)):
        fd = [(mix.log_density(x + e)[0] - mix.log_density(x - e)[0]) / (2 * h) for e in np.eye(2) * h]
        np.testing.assert_allclose(mix.score(x)[0], fd, atol=1e-6)


def test_score_far_from_modes_is_finite():
    mix = random_mixture(4, 2, seed=1)
    assert np.all(np.isfinite(mix.score([[80.0, -90.0]])))


def test_score_target_lookup():
    X = np.array([[0.0, 1.0], [2.0, 3.0]])
    U = np.array([[1.0, 1.0], [-1.0, 0.5]])
    t = TargetModel(ScoreTarget(X, U), "ksd")
    np.testing.assert_array_equal(score(t, [2.0, 3.0]), [-1.0, 0.5])
    with pytest.raises(KeyError):
        score(t, [9.0, 9.0])


@pytest.mark.parametrize("bad", [
    dict(weights=[0.5, 0.4], means=[[0.0], [1.0]], variances=[[1.0], [1.0]]),
    dict(weights=[1.0], means=[[0.0]], variances=[[0.0]]),
    dict(weights=[1.0], means=[[0.0, 1.0]], variances=[[1.0]]),
    dict(weights=[1.2, -0.2], means=[[0.0], [1.0]], variances=[[1.0], [1.0]]),
])
def test_mixture_validation(bad):
    with pytest.raises(DataError):
        GaussianMixture(**bad)


def test_mixture_json_round_trip(tmp_path):
    mix = random_mixture(5, 3, seed=2)
    doc = mix.to_dict()
    assert doc["d"] == 3
    again = GaussianMixture.from_dict(doc)
    np.testing.assert_array_equal(again.means, mix.means)
    with pytest.raises(DataError):
        GaussianMixture.from_dict({"d": 2, "components": [{"weight": 1.0, "mean": [0.0, 0.0]}]})
    with pytest.raises(DataError):
        GaussianMixture.from_dict({**doc, "d": 4})


def test_kernel_mean_vectorised_matches_single():
    t = TargetModel(random_mixture(4, 2, seed=9))
    k = KernelSpec("se", 0.4)
    X = np.random.default_rng(0).standard_normal((6, 2))
    vec = kernel_mean(t, k, X)
    assert all(vec[i] == pytest.approx(kernel_mean(t, k, X[i]), rel=1e-15) for i in range(6))


def test_kernel_mean_and_double_integral_monte_carlo_3d():
    rng = np.random.default_rng(7)
    mix = random_mixture(6, 3, seed=7)
    t, k = TargetModel(mix), KernelSpec("se", 0.6)
    Y, Yp = mix.sample(200_000, rng), mix.sample(200_000, rng)
    x = rng.uniform(-1, 1, 3)
    vals = np.exp(-0.5 * np.sum((Y - x) ** 2, axis=1) / 0.36)
    assert abs(vals.mean() - kernel_mean(t, k, x)) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)
    vals = np.exp(-0.5 * np.sum((Y - Yp) ** 2, axis=1) / 0.36)
    assert abs(vals.mean() - double_integral(t, k)) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)
