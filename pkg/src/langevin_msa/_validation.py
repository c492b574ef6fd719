"""Small argument checks shared by the public functions."""

from __future__ import annotations

import numbers

import numpy as np

from .errors import InvalidArgumentError


def check_positive(value, name, *, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise InvalidArgumentError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidArgumentError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_int(value, name, *, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidArgumentError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def as_vector(x, name, d=None):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise InvalidArgumentError(f"{name} has length {arr.shape[0]}, expected {d}")
    return arr


def as_positive_grid(values, name, *, min_len=1):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size < min_len:
        raise InvalidArgumentError(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidArgumentError(f"{name} must contain finite positive values")
    return arr
