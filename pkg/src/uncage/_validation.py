"""Input validation helpers.

Images are ``(H, W, C)`` float arrays with ``C`` in {1, 3, 4} and values
nominally in [0, 1]; masks are ``(H, W)`` bool arrays; probability maps are
``(H, W)`` float arrays.
"""
from __future__ import annotations

import math

import numpy as np

from .exceptions import InvalidArgumentError


def check_image(img, *, channels=(1, 3, 4), name="image") -> np.ndarray:
    """Return ``img`` as a float64 ``(H, W, C)`` array, or raise."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InvalidArgumentError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    h, w, c = arr.shape
    if h < 1 or w < 1:
        raise InvalidArgumentError(f"{name} must be at least 1x1, got {w}x{h}")
    if c not in channels:
        raise InvalidArgumentError(f"{name} must have {channels} channels, got {c}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite samples")
    return arr


def check_map(m, *, name="map") -> np.ndarray:
    """Return ``m`` as a finite float64 ``(H, W)`` array, or raise."""
    arr = np.asarray(m)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def check_mask(m, *, name="mask") -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def check_same_size(a: np.ndarray, b: np.ndarray, names=("a", "b")) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise InvalidArgumentError(
            f"{names[0]} is {a.shape[1]}x{a.shape[0]} but {names[1]} is {b.shape[1]}x{b.shape[0]}"
        )


def check_finite(**values) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise InvalidArgumentError(f"{name} must be finite, got {v}")


def check_odd(value: int, name: str, minimum: int = 1) -> int:
    value = int(value)
    if value < minimum or value % 2 == 0:
        raise InvalidArgumentError(f"{name} must be odd and >= {minimum}, got {value}")
    return value
