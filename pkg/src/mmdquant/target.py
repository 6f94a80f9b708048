"""Target distributions: analytic diagonal Gaussian mixtures and score-only targets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import ConfigurationError, DataError
from .kernels import KernelSpec, SteinKernel, _as_2d

MODES = ("mmd", "ksd")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Mixture of Gaussians with diagonal covariances.

    Parameters
    ----------
    weights : array of shape (c,)
    means : array of shape (c, d)
    variances : array of shape (c, d)
        Diagonal covariance entries.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.asarray(self.means, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if m.shape != v.shape or m.shape[0] != w.shape[0] or m.ndim != 2:
            raise DataError(
                f"mixture shapes disagree: weights {w.shape}, means {m.shape}, variances {v.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise DataError("mixture parameters must be finite")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DataError("mixture weights must be positive and sum to 1")
        if np.any(v <= 0):
            raise DataError("mixture variances must be positive")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_dict(cls, doc):
        try:
            comps = doc["components"]
            weights = [c["weight"] for c in comps]
            means = [c["mean"] for c in comps]
            variances = [c["var_diag"] for c in comps]
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed mixture document: missing {exc}") from exc
        mix = cls(weights, means, variances)
        if "d" in doc and int(doc["d"]) != mix.dim:
            raise DataError(f"mixture declares d={doc['d']} but components have d={mix.dim}")
        return mix

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "d": self.dim,
            "components": [
                {"weight": float(w), "mean": m.tolist(), "var_diag": v.tolist()}
                for w, m, v in zip(self.weights, self.means, self.variances)
            ],
        }

    def _component_logpdf(self, X):
        X = _as_2d(X)
        diff = X[:, None, :] - self.means[None]
        quad = np.sum(diff * diff / self.variances[None], axis=2)
        lognorm = -0.5 * np.sum(np.log(2 * np.pi * self.variances), axis=1)
        return np.log(self.weights)[None] + lognorm[None] - 0.5 * quad

    def log_density(self, X):
        return logsumexp(self._component_logpdf(X), axis=1)

    def score(self, X):
        """Gradient of the log density at each row of ``X``."""
        X = _as_2d(X)
        logp = self._component_logpdf(X)
        resp = np.exp(logp - logsumexp(logp, axis=1, keepdims=True))
        grads = (self.means[None] - X[:, None, :]) / self.variances[None]
        return np.einsum("nc,ncd->nd", resp, grads)

    def sample(self, n, rng):
        rng = np.random.default_rng(rng)
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        return self.means[comp] + rng.standard_normal((n, self.dim)) * np.sqrt(self.variances[comp])


@dataclass(frozen=True, eq=False)
class ScoreTarget:
    """Target known only through score evaluations at given points."""

    points: np.ndarray
    scores: np.ndarray
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        X = _as_2d(self.points)
        U = _as_2d(self.scores, "scores")
        if X.shape != U.shape:
            raise DataError(f"score shape {U.shape} does not match point shape {X.shape}")
        if not np.all(np.isfinite(U)):
            bad = int(np.argwhere(~np.isfinite(U))[0, 0])
            raise DataError(f"non-finite score at row {bad}")
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "scores", U)
        object.__setattr__(self, "_index", {row.tobytes(): i for i, row in enumerate(X)})

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def score(self, X):
        X = _as_2d(X)
        if X.shape == self.points.shape and np.array_equal(X, self.points):
            return self.scores
        out = np.empty_like(X)
        for r, row in enumerate(X):
            i = self._index.get(np.ascontiguousarray(row).tobytes())
            if i is None:
                raise KeyError(f"point {row.tolist()} has no stored score")
            out[r] = self.scores[i]
        return out


@dataclass(frozen=True, eq=False)
class TargetModel:
    """A target distribution together with the discrepancy mode.

    ``mmd`` needs a :class:`GaussianMixture` (closed-form kernel means for the
    squared-exponential kernel); ``ksd`` accepts either source.
    """

    source: object
    mode: str = "mmd"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not isinstance(self.source, (GaussianMixture, ScoreTarget)):
            raise ConfigurationError(f"unsupported target source {type(self.source).__name__}")
        if self.mode == "mmd" and not isinstance(self.source, GaussianMixture):
            raise ConfigurationError("mmd mode requires a GaussianMixture target with exact kernel means")

    @property
    def dim(self) -> int:
        return self.source.dim

    def kernel_for(self, base: KernelSpec):
        """The kernel the discrepancy is measured in: ``base`` or its Stein kernel."""
        return SteinKernel(base) if self.mode == "ksd" else base


def _check_pairing(target: TargetModel, kernel):
    if target.mode == "ksd":
        if not isinstance(kernel, SteinKernel):
            raise ConfigurationError(
                f"ksd target requires a SteinKernel, got {type(kernel).__name__}"
            )
        return
    if not (isinstance(kernel, KernelSpec) and kernel.family == "squared_exponential"):
        raise ConfigurationError(
            f"exact kernel means for a GaussianMixture target need a squared_exponential kernel, "
            f"got {getattr(kernel, 'family', type(kernel).__name__)}"
        )


def kernel_mean(target: TargetModel, kernel, x):
    """Kernel mean embedding ``h(x) = E_{y ~ mu} k(x, y)``.

    Accepts a single point (returns a float) or a 2-d array of points
    (returns an array). Identically zero for Stein kernels.
    """
    _check_pairing(target, kernel)
    single = np.ndim(x) <= 1
    X = _as_2d(x)
    if target.mode == "ksd":
        out = np.zeros(X.shape[0])
        return 0.0 if single else out
    mix = target.source
    if X.shape[1] != mix.dim:
        raise DataError(f"point dimension {X.shape[1]} does not match target dimension {mix.dim}")
    ell2 = kernel.lengthscale ** 2
    s = ell2 + mix.variances  # (c, d)
    amp = mix.weights * np.prod(np.sqrt(ell2 / s), axis=1)
    diff = X[:, None, :] - mix.means[None]
    expo = -0.5 * np.sum(diff * diff / s[None], axis=2)
    out = np.exp(expo) @ amp
    return float(out[0]) if single else out


def double_integral(target: TargetModel, kernel) -> float:
    """``C^2 = E k(x, y)`` for independent ``x, y ~ mu``; zero for Stein kernels."""
    _check_pairing(target, kernel)
    if target.mode == "ksd":
        return 0.0
    mix = target.source
    ell2 = kernel.lengthscale ** 2
    s = ell2 + mix.variances[:, None, :] + mix.variances[None, :, :]
    diff = mix.means[:, None, :] - mix.means[None, :, :]
    pair = np.prod(np.sqrt(ell2 / s), axis=2) * np.exp(-0.5 * np.sum(diff * diff / s, axis=2))
    return float(mix.weights @ pair @ mix.weights)


def score(target: TargetModel, x):
    """Score ``grad log p(x)``; a lookup for :class:`ScoreTarget`."""
    single = np.ndim(x) <= 1
    out = target.source.score(x)
    return out[0] if single else out


def random_mixture(n_components: int, dim: int = 2, seed=0, spread: float = 1.5,
                   var_range=(0.02, 0.08)) -> GaussianMixture:
    """A seeded synthetic mixture: uniform means in ``[-spread, spread]^d``,
    Dirichlet(2) weights, uniform diagonal variances in ``var_range``."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.full(n_components, 2.0))
    weights = weights / weights.sum()
    means = rng.uniform(-spread, spread, size=(n_components, dim))
    variances = rng.uniform(*var_range, size=(n_components, dim))
    return GaussianMixture(weights, means, variances)
