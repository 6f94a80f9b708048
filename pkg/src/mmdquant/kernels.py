"""Base kernels, the Stein kernel built on top of them, and the median heuristic.

Both supported families are radial, ``k(x, y) = phi(||x - y||^2)``, so every
derivative the Stein kernel needs follows from ``phi``, ``phi'`` and ``phi''``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import ConfigurationError, DataError, DegenerateDataError

FAMILIES = ("squared_exponential", "inverse_multiquadric")
_ALIASES = {"se": "squared_exponential", "imq": "inverse_multiquadric"}


@dataclass(frozen=True)
class KernelSpec:
    """A radial base kernel with a length-scale."""

    family: str = "squared_exponential"
    lengthscale: float = 1.0

    def __post_init__(self):
        family = _ALIASES.get(self.family, self.family)
        if family not in FAMILIES:
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", family)
        ell = float(self.lengthscale)
        if not (math.isfinite(ell) and ell > 0):
            raise ConfigurationError(f"lengthscale must be positive and finite, got {self.lengthscale!r}")
        object.__setattr__(self, "lengthscale", ell)

    def profile(self, t):
        """Return ``phi(t), phi'(t), phi''(t)`` at squared distances ``t``."""
        ell2 = self.lengthscale ** 2
        if self.family == "squared_exponential":
            phi = np.exp(-t / (2.0 * ell2))
            return phi, -phi / (2.0 * ell2), phi / (4.0 * ell2 * ell2)
        base = 1.0 + t / ell2
        phi = base ** -0.5
        return phi, -0.5 / ell2 * base ** -1.5, 0.75 / (ell2 * ell2) * base ** -2.5

    def __call__(self, x, y):
        return evaluate(self, x, y)


@dataclass(frozen=True)
class SteinKernel:
    """Stein kernel ``k_mu`` built from a base kernel and the target score.

    Scores are not stored here; they travel with the points (see
    :class:`mmdquant.target.TargetModel` and :class:`mmdquant.io.CandidateSet`).
    """

    base: KernelSpec

    @property
    def lengthscale(self):
        return self.base.lengthscale


def _as_2d(X, name="points"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DataError(f"{name} must be a 2-d array, got shape {X.shape}")
    return X


def _sqdist(X, Y):
    # Dimension-wise accumulation keeps the summation order independent of
    # the batch shape, so single evaluations and Gram entries agree bitwise.
    t = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        diff = X[:, k, None] - Y[None, :, k]
        t += diff * diff
    return t


def cross_matrix(kernel, X, Y, UX=None, UY=None):
    """Kernel matrix between the rows of ``X`` and ``Y``.

    For a :class:`SteinKernel` the score arrays ``UX`` and ``UY`` (same shapes
    as ``X`` and ``Y``) are required.
    """
    X = _as_2d(X)
    Y = _as_2d(Y)
    if X.shape[1] != Y.shape[1]:
        raise DataError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if isinstance(kernel, KernelSpec):
        phi, _, _ = kernel.profile(_sqdist(X, Y))
        return phi
    if not isinstance(kernel, SteinKernel):
        raise ConfigurationError(f"unsupported kernel object {kernel!r}")
    if UX is None or UY is None:
        raise ConfigurationError("the Stein kernel needs score evaluations for both arguments")
    UX = _as_2d(UX, "scores")
    UY = _as_2d(UY, "scores")
    if UX.shape != X.shape or UY.shape != Y.shape:
        raise DataError("score arrays must match the point arrays in shape")
    d = X.shape[1]
    t = _sqdist(X, Y)
    phi, dphi, d2phi = kernel.base.profile(t)
    zu = np.zeros_like(t)
    uu = np.zeros_like(t)
    for k in range(d):
        zu += (X[:, k, None] - Y[None, :, k]) * (UY[None, :, k] - UX[:, k, None])
        uu += UX[:, k, None] * UY[None, :, k]
    # div_x grad_y k + grad_x k . u(y) + grad_y k . u(x) + k u(x).u(y)
    return -4.0 * d2phi * t - 2.0 * d * dphi + 2.0 * dphi * zu + phi * uu


def evaluate(kernel: KernelSpec, x, y) -> float:
    """Base kernel value ``k(x, y)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DataError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(cross_matrix(kernel, x[None], y[None])[0, 0])


def stein_evaluate(kernel: SteinKernel, x, ux, y, uy) -> float:
    """Stein kernel value ``k_mu(x, y)`` given scores ``ux = u(x)``, ``uy = u(y)``."""
    arrs = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (x, ux, y, uy)]
    if len({a.shape for a in arrs}) != 1:
        raise DataError("x, ux, y, uy must share one dimension")
    x, ux, y, uy = arrs
    return float(cross_matrix(kernel, x[None], y[None], ux[None], uy[None])[0, 0])


def diagonal(kernel, X, U=None):
    """``k(x_i, x_i)`` for every row, without forming the Gram matrix.

    Uses the same expression as :func:`cross_matrix` at zero separation, so the
    values equal the Gram diagonal bitwise.
    """
    X = _as_2d(X)
    t = np.zeros(X.shape[0])
    if isinstance(kernel, KernelSpec):
        return kernel.profile(t)[0]
    U = _as_2d(U, "scores")
    phi, dphi, d2phi = kernel.base.profile(t)
    d = X.shape[1]
    uu = np.zeros_like(t)
    for k in range(d):
        uu += U[:, k] * U[:, k]
    return -4.0 * d2phi * t - 2.0 * d * dphi + 2.0 * dphi * np.zeros_like(t) + phi * uu


def gram(kernel, points, scores=None):
    """Symmetric ``n x n`` kernel matrix over a point set."""
    X = _as_2d(points)
    if X.shape[0] == 0:
        raise DataError("gram needs at least one point")
    return cross_matrix(kernel, X, X, scores, scores)


def median_heuristic(points, subsample: int = 1000, seed: int = 0) -> float:
    """Length-scale ``sqrt(median(||x_i - x_j||^2) / 2)`` over pairs ``i < j``.

    When there are more than ``subsample`` points, a seeded subset drawn
    without replacement is used.
    """
    X = _as_2d(points)
    n = X.shape[0]
    if n < 2:
        raise DataError("median heuristic needs at least 2 points")
    if subsample < 2:
        raise ConfigurationError("median subsample must be at least 2")
    if n > subsample:
        rng = np.random.default_rng(seed)
        X = X[np.sort(rng.choice(n, size=subsample, replace=False))]
    med = float(np.median(pdist(X, "sqeuclidean")))
    if not med > 0:
        raise DegenerateDataError("median squared pairwise distance is zero; length-scale undefined")
    return math.sqrt(0.5 * med)
