"""Closed-form MMD/KSD and the incremental state used by the greedy selectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .candidates import CandidateSet
from .exceptions import DataError
from .kernels import SteinKernel, cross_matrix, diagonal
from .target import TargetModel, double_integral, kernel_mean

CLAMP_TOL = 1e-10
GRAM_THRESHOLD = 4096


def _clamp(value):
    if -CLAMP_TOL <= value < 0.0:
        return 0.0
    return value


def candidate_scores(candidates: CandidateSet, target: TargetModel, kernel):
    """Scores needed by ``kernel`` at the candidate points (``None`` for base kernels)."""
    if not isinstance(kernel, SteinKernel):
        return None
    if candidates.scores is not None:
        return candidates.scores
    try:
        return target.source.score(candidates.points)
    except KeyError as exc:
        raise DataError(f"no score available for candidate: {exc}") from exc


class GramOperator:
    """Access to the candidate Gram matrix.

    The full matrix is materialised when ``n <= threshold``; above that,
    columns are computed on demand so memory stays ``O(n)`` per request.
    """

    def __init__(self, kernel, points, scores=None, threshold=GRAM_THRESHOLD):
        self.kernel = kernel
        self.points = np.asarray(points, dtype=float)
        self.scores = scores
        self.n = self.points.shape[0]
        self.diag = diagonal(kernel, self.points, scores)
        self._full = None
        if self.n <= threshold:
            self._full = cross_matrix(kernel, self.points, self.points, scores, scores)

    @property
    def materialised(self) -> bool:
        return self._full is not None

    def _rows(self, idx):
        U = None if self.scores is None else self.scores[idx]
        return self.points[idx], U

    def columns(self, idx):
        """``K[:, idx]`` as an ``(n, len(idx))`` array."""
        idx = np.asarray(idx, dtype=int)
        if self._full is not None:
            return self._full[:, idx]
        Y, UY = self._rows(idx)
        return cross_matrix(self.kernel, self.points, Y, self.scores, UY)

    def submatrix(self, idx):
        idx = np.asarray(idx, dtype=int)
        if self._full is not None:
            return self._full[np.ix_(idx, idx)]
        Y, UY = self._rows(idx)
        return cross_matrix(self.kernel, Y, Y, UY, UY)

    def full(self):
        if self._full is None:
            return cross_matrix(self.kernel, self.points, self.points, self.scores, self.scores)
        return self._full


@dataclass
class EmpiricalMeasure:
    """A (possibly weighted) measure on a multiset of candidate indices."""

    indices: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int).ravel()
        if self.indices.size == 0:
            raise DataError("empirical measure needs at least one index")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != self.indices.shape:
                raise DataError("one weight per index is required")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise DataError("weights must be nonnegative and sum to 1")
            self.weights = w

    def collapsed(self):
        """Distinct indices and their total weights."""
        w = self.weights
        if w is None:
            w = np.full(self.indices.size, 1.0 / self.indices.size)
        uniq, inv = np.unique(self.indices, return_inverse=True)
        return uniq, np.bincount(inv, weights=w)


def mmd_squared(measure: EmpiricalMeasure, candidates: CandidateSet, target: TargetModel, kernel) -> float:
    """Squared discrepancy between ``measure`` (over ``candidates``) and the target.

    Computed from scratch: ``w'Kw - 2 w'h + C^2``. Values within ``CLAMP_TOL``
    below zero are clamped to zero; anything more negative is returned as is.
    """
    if not isinstance(measure, EmpiricalMeasure):
        measure = EmpiricalMeasure(measure)
    if measure.indices.min() < 0 or measure.indices.max() >= candidates.n:
        raise DataError(f"measure index out of range for {candidates.n} candidates")
    idx, w = measure.collapsed()
    X = candidates.points[idx]
    U = candidate_scores(candidates, target, kernel)
    U = None if U is None else U[idx]
    K = cross_matrix(kernel, X, X, U, U)
    h = kernel_mean(target, kernel, X)
    value = float(w @ K @ w - 2.0 * (w @ h) + double_integral(target, kernel))
    return _clamp(value)


@dataclass
class SelectionState:
    """Running sums for a growing multiset of selections.

    ``r[j]`` is the sum of ``k(x_p, x_j)`` over selected ``p``; ``a`` is the
    squared RKHS norm of ``sum_p k(x_p, .) - t h``; ``t`` counts selections.
    """

    r: np.ndarray
    h: np.ndarray
    c2: float
    a: float = 0.0
    t: int = 0
    h_sum: float = 0.0
    selected: list = field(default_factory=list)

    @property
    def mmd_squared(self) -> float:
        if self.t == 0:
            raise ValueError("no points selected yet")
        return _clamp(self.a / (self.t * self.t))


def state_init(candidates: CandidateSet, target: TargetModel, kernel) -> SelectionState:
    """Zeroed state with kernel means cached for all candidates."""
    h = kernel_mean(target, kernel, candidates.points)
    return SelectionState(r=np.zeros(candidates.n), h=np.asarray(h, dtype=float), c2=double_integral(target, kernel))


def state_update(state: SelectionState, chosen, gram: GramOperator) -> SelectionState:
    """Add the multiset ``chosen`` to the state in place and return it."""
    chosen = np.asarray(chosen, dtype=int).ravel()
    n = state.r.shape[0]
    if chosen.size == 0 or chosen.min() < 0 or chosen.max() >= n:
        raise IndexError(f"chosen indices {chosen.tolist()} out of range for {n} candidates")
    s = chosen.size
    cols = gram.columns(chosen)
    block = float(cols[chosen].sum())
    h_new = float(state.h[chosen].sum())
    f_at_new = float(state.r[chosen].sum()) - state.t * h_new
    f_dot_h = state.h_sum - state.t * state.c2
    state.a += block - 2.0 * s * h_new + s * s * state.c2 + 2.0 * (f_at_new - s * f_dot_h)
    state.r += cols.sum(axis=1)
    state.h_sum += h_new
    state.t += s
    state.selected.extend(chosen.tolist())
    return state
