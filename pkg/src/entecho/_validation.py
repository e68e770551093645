"""Small input-validation helpers used at public entry points."""
import numbers

import numpy as np

from .exceptions import DimensionMismatch, NotHermitian


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_real(value, name, *, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if nonnegative and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value


def check_square(matrix, name="matrix"):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {matrix.shape}")
    return matrix


def check_hermitian(matrix, atol=1e-10, name="matrix"):
    matrix = check_square(matrix, name)
    dev = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
    if dev > atol:
        raise NotHermitian(f"{name} deviates from Hermitian by {dev:.3e} (atol {atol:.1e})")
    return matrix


def as_time_array(t):
    """Return ``t`` as a 1d float array plus a flag telling whether it was scalar."""
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise ValueError("times must be a scalar or 1d array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("times must be finite")
    return arr, scalar
