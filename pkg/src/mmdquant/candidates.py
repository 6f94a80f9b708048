"""The candidate set from which representative points are drawn."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """``n`` points in ``d`` dimensions, optionally with score evaluations."""

    points: np.ndarray
    scores: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        X = np.asarray(self.points, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError(f"candidate set must be a non-empty (n, d) array, got shape {X.shape}")
        bad = ~np.isfinite(X)
        if bad.any():
            raise DataError(f"non-finite value in candidate row {int(np.argwhere(bad)[0, 0])}")
        X = X.copy()
        X.setflags(write=False)
        object.__setattr__(self, "points", X)
        if self.scores is not None:
            U = np.asarray(self.scores, dtype=float)
            if U.ndim == 1:
                U = U[:, None]
            if U.shape != X.shape:
                raise DataError(
                    f"score shape {U.shape} does not match point shape {X.shape} "
                    f"({U.shape[0]} score rows vs {X.shape[0]} points)"
                )
            bad = ~np.isfinite(U)
            if bad.any():
                raise DataError(f"non-finite value in score row {int(np.argwhere(bad)[0, 0])}")
            U = U.copy()
            U.setflags(write=False)
            object.__setattr__(self, "scores", U)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n
