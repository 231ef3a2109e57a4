"""Small input validation helpers shared across modules."""

from __future__ import annotations

import numbers

import numpy as np


def check_paths(values, *, name: str = "paths") -> np.ndarray:
    """Return ``values`` as a float64 array of shape (m, n + 1, d).

    A 2-d input is treated as a single path.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must have shape (n_paths, n_points, d), got {arr.shape}")
    if arr.shape[1] < 2:
        raise ValueError(f"{name} needs at least 2 grid points, got {arr.shape[1]}")
    if arr.shape[2] < 1:
        raise ValueError(f"{name} needs at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_finite_matrix(X, *, name: str = "X", ndim: int = 2) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_int(value, name: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_real(value, name: str, *, lower=None, upper=None, lower_open=False, upper_open=False) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise TypeError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if lower is not None and (value < lower or (lower_open and value == lower)):
        op = ">" if lower_open else ">="
        raise ValueError(f"{name} must be {op} {lower}, got {value}")
    if upper is not None and (value > upper or (upper_open and value == upper)):
        op = "<" if upper_open else "<="
        raise ValueError(f"{name} must be {op} {upper}, got {value}")
    return value
