"""Small input-validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np


def as_float_array(x, name: str = "array") -> np.ndarray:
    """Coerce to a float64 ndarray, rejecting non-numeric input."""
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} is not numeric: {exc}") from None
    return arr


def as_vector(x, name: str = "vector", length: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float64 vector, optionally checking its length."""
    arr = as_float_array(x, name)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.size != length:
        raise ValueError(f"{name} must have length {length}, got {arr.size}")
    return arr


def check_last_axis(arr: np.ndarray, width: int, name: str = "array") -> np.ndarray:
    """Require ``arr.shape[-1] == width`` (vectors or stacked batches)."""
    if arr.ndim == 0 or arr.shape[-1] != width:
        raise ValueError(
            f"{name} must have {width} entries along its last axis, got shape {arr.shape}"
        )
    return arr


def check_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
