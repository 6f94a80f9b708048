"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ConfigurationError, DataError


def check_candidates(X):
    """Return ``X`` as a finite float array of shape (n, d)."""
    try:
        return check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_2d=True)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def check_scores(scores, X):
    if scores is None:
        return None
    U = check_candidates(scores)
    if U.shape != X.shape:
        raise DataError(f"scores have shape {U.shape}, expected {X.shape} to match the candidates")
    return U


def check_positive_int(name, value, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_lengthscale(value):
    """Either the string ``'median'`` or a positive finite float."""
    if isinstance(value, str):
        if value == "median":
            return value
        try:
            value = float(value)
        except ValueError:
            raise ConfigurationError(f"lengthscale must be 'median' or a positive number, got {value!r}") from None
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ConfigurationError(f"lengthscale must be positive and finite, got {value!r}")
    return value


def split_points(total, s):
    """Iterations needed to select ``total`` points ``s`` at a time (``s`` must divide ``total``)."""
    total = check_positive_int("points", total)
    s = check_positive_int("s", s)
    if total % s:
        raise ConfigurationError(f"s={s} must divide the number of points {total}")
    return total // s
