"""Input validation helpers shared by the functional API and the estimators."""

import numpy as np

from .exceptions import NonFiniteCoordinateError


def as_points(X, name="points") -> np.ndarray:
    """Coerce ``X`` to an ``(n, 3)`` float64 array of finite coordinates.

    Empty input yields a ``(0, 3)`` array. Raises ``ValueError`` on a wrong
    shape and :class:`NonFiniteCoordinateError` on NaN/Inf.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, 3))
    if arr.ndim == 1 and arr.shape[0] == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
        raise NonFiniteCoordinateError(f"{name} row {bad} has a non-finite coordinate")
    return np.ascontiguousarray(arr)


def check_probability(value, name):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_count(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)
