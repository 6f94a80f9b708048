"""scikit-learn style wrapper around the selection algorithms."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .candidates import CandidateSet
from .exceptions import ConfigurationError
from .kernels import KernelSpec, median_heuristic
from .selectors import ALGORITHMS, SelectionConfig, select
from .target import GaussianMixture, ScoreTarget, TargetModel
from .validation import check_candidates, check_lengthscale, check_positive_int, check_scores, split_points


def build_setup(points, scores=None, mixture=None, mode="mmd", kernel="se", lengthscale="median",
                median_subsample=1000, seed=0):
    """Resolve candidates, target and kernel from raw inputs.

    Parameters
    ----------
    points : array of shape (n, d)
    scores : array of shape (n, d), optional
        Score evaluations at ``points``; used as the target in ksd mode.
    mixture : GaussianMixture, optional
        Analytic target. Required in mmd mode.
    mode : {'mmd', 'ksd'}
    kernel : {'se', 'imq'}
        Base kernel family.
    lengthscale : 'median' or float

    Returns
    -------
    candidates, target, kernel, lengthscale
    """
    X = check_candidates(points)
    U = check_scores(scores, X)
    lengthscale = check_lengthscale(lengthscale)
    if mode == "mmd":
        if mixture is None:
            raise ConfigurationError("mmd mode needs a Gaussian mixture target (--mixture)")
        source = mixture
    elif mode == "ksd":
        if U is not None:
            source = ScoreTarget(X, U)
        elif mixture is not None:
            source = mixture
        else:
            raise ConfigurationError("ksd mode needs score evaluations (--scores) or a mixture (--mixture)")
    else:
        raise ConfigurationError(f"mode must be 'mmd' or 'ksd', got {mode!r}")
    if isinstance(source, GaussianMixture) and source.dim != X.shape[1]:
        raise ConfigurationError(f"mixture dimension {source.dim} does not match candidate dimension {X.shape[1]}")
    target = TargetModel(source, mode)
    if lengthscale == "median":
        lengthscale = median_heuristic(X, subsample=median_subsample, seed=seed)
    base = KernelSpec(kernel, lengthscale)
    return CandidateSet(X, U), target, target.kernel_for(base), float(lengthscale)


class KernelQuantizer(TransformerMixin, BaseEstimator):
    """Pick ``n_points`` representative rows of ``X`` by greedy MMD or KSD minimisation.

    Parameters
    ----------
    n_points : int
        Total number of points to select (with repeats unless ``binary``).
    s : int
        Points chosen jointly per iteration; must divide ``n_points``.
    algorithm : str
        One of ``myopic``, ``nonmyopic``, ``minibatch``, ``oneshot``, ``sdr``.
    mode : {'mmd', 'ksd'}
    target : GaussianMixture, optional
        Required in mmd mode; in ksd mode either this or ``scores`` at fit.
    kernel : {'se', 'imq'}
    lengthscale : 'median' or float
    batch_size : int
        Mini-batch size ``b`` (0 disables mini-batching).
    time_limit : float, optional
        Seconds per branch-and-bound solve; past it the best selection found
        is used (see ``result_.config['heuristic_iterations']``).
    random_state : int
        Seeds the mini-batch schedule, the median heuristic subsample and
        the relaxation rounding.

    Attributes
    ----------
    indices_ : ndarray of shape (n_points,)
    pi_ : ndarray of shape (m, s)
    trace_ : ndarray of shape (m,)
    lengthscale_ : float
    result_ : SelectionResult
    """

    def __init__(self, n_points=10, s=1, algorithm="nonmyopic", mode="mmd", target=None, kernel="se",
                 lengthscale="median", batch_size=0, batch_strategy="uniform_without_replacement",
                 solver="auto", binary=False, median_subsample=1000, rank=None, draws=50,
                 time_limit=None, random_state=0):
        self.n_points = n_points
        self.s = s
        self.algorithm = algorithm
        self.mode = mode
        self.target = target
        self.kernel = kernel
        self.lengthscale = lengthscale
        self.batch_size = batch_size
        self.batch_strategy = batch_strategy
        self.solver = solver
        self.binary = binary
        self.median_subsample = median_subsample
        self.rank = rank
        self.draws = draws
        self.time_limit = time_limit
        self.random_state = random_state

    def fit(self, X, y=None, scores=None):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        m = split_points(self.n_points, self.s)
        seed = int(self.random_state or 0)
        candidates, target, kernel, ell = build_setup(
            X, scores, self.target, self.mode, self.kernel, self.lengthscale,
            check_positive_int("median_subsample", self.median_subsample, 2), seed,
        )
        algorithm = self.algorithm
        if algorithm == "minibatch" and not self.batch_size:
            raise ConfigurationError("algorithm='minibatch' needs batch_size >= 1")
        config = SelectionConfig(
            m=m, s=self.s, b=int(self.batch_size or 0), batch_strategy=self.batch_strategy, seed=seed,
            solver=self.solver, binary=bool(self.binary), rank=self.rank, draws=self.draws,
            time_limit=self.time_limit,
        )
        result = select(candidates, target, kernel, algorithm, config)
        self.result_ = result
        self.pi_ = result.pi
        self.indices_ = result.indices
        self.trace_ = result.trace
        self.timings_ms_ = result.timings_ms
        self.lengthscale_ = ell
        self.n_features_in_ = candidates.dim
        return self

    def transform(self, X):
        """Rows of ``X`` at the selected indices (``X`` is normally the fitted set)."""
        check_is_fitted(self, "indices_")
        X = check_candidates(X)
        if X.shape[1] != self.n_features_in_:
            raise ConfigurationError(f"X has {X.shape[1]} features, fitted with {self.n_features_in_}")
        return X[self.indices_]

    def fit_transform(self, X, y=None, scores=None):
        return self.fit(X, y, scores=scores).transform(X)

    @property
    def mmd_squared_(self) -> float:
        check_is_fitted(self, "trace_")
        return float(np.asarray(self.trace_)[-1])
