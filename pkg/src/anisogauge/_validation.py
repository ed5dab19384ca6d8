"""Input validation helpers shared by every module."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError

# points this close to the origin are rejected instead of regularized
ORIGIN_RADIUS = 1e-8


def check_points(x, dim, name="x"):
    """Return ``x`` as a float array of shape ``(n, dim)`` plus a flag telling
    whether the input was a single vector."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = check_array(np.atleast_2d(arr), dtype=np.float64, ensure_2d=True,
                      ensure_all_finite=True, input_name=name)
    if arr.shape[1] != dim:
        raise ValueError(
            f"dimension mismatch: {name} has {arr.shape[1]} coordinates, expected {dim}")
    return arr, single


def unwrap(values, single):
    """Undo the batching performed by :func:`check_points`."""
    return values[0] if single else values


def check_away_from_origin(x, name="x"):
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < ORIGIN_RADIUS):
        raise DomainError(f"{name} lies within {ORIGIN_RADIUS:g} of the origin")


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value!r}")
    return float(value)


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be at least {minimum}, got {value!r}")
    return int(value)
