import numpy as np
import pytest
from sklearn.base import clone

from mmdquant import KernelQuantizer, random_mixture
from mmdquant.exceptions import ConfigurationError, DataError
from mmdquant.selectors import select_nonmyopic
from mmdquant.estimator import build_setup


@pytest.fixture
def data():
    mix = random_mixture(3, 2, seed=2)
    return mix, mix.sample(80, 1)


def test_fit_transform(data):
    mix, X = data
    q = KernelQuantizer(n_points=12, s=4, target=mix, lengthscale=0.3)
    Z = q.fit_transform(X)
    assert Z.shape == (12, 2)
    assert q.pi_.shape == (3, 4) and q.trace_.shape == (3,)
    np.testing.assert_array_equal(Z, X[q.indices_])
    cands, target, kernel, _ = build_setup(X, mixture=mix, lengthscale=0.3)
    np.testing.assert_array_equal(q.pi_, select_nonmyopic(cands, target, kernel, 3, 4).pi)


def test_params_and_clone(data):
    mix, _ = data
    q = KernelQuantizer(n_points=6, algorithm="myopic", target=mix)
    assert q.get_params()["n_points"] == 6
    c = clone(q).set_params(n_points=8)
    assert c.n_points == 8 and q.n_points == 6


def test_median_lengthscale_and_ksd(data):
    mix, X = data
    q = KernelQuantizer(n_points=5, mode="ksd", kernel="imq").fit(X, scores=mix.score(X))
    assert q.lengthscale_ > 0 and q.n_features_in_ == 2
    assert q.mmd_squared_ >= 0


def test_errors(data):
    mix, X = data
    with pytest.raises(ConfigurationError):
        KernelQuantizer(n_points=5).fit(X)
    with pytest.raises(ConfigurationError):
        KernelQuantizer(n_points=5, s=2, target=mix).fit(X)
    with pytest.raises(DataError):
        KernelQuantizer(n_points=2, target=mix).fit(np.array([[0.0, np.inf]]))
    with pytest.raises(ConfigurationError):
        KernelQuantizer(n_points=2, algorithm="minibatch", target=mix).fit(X)
    with pytest.raises(Exception):
        KernelQuantizer().transform(X)
