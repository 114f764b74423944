"""Raster primitives shared by every stage.

Images are ``(H, W, C)`` float64 arrays in [0, 1], row-major, ``x`` along
columns and ``y`` down the rows. Interpolations are written in ``a + t*(b - a)``
form so that uniform regions survive resampling bit-exactly.
"""
from __future__ import annotations

import numpy as np

from ._validation import check_image, check_map
from .exceptions import InvalidArgumentError

# Rec.601
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _axis_samples(n_src: int, n_dst: int):
    # half-pixel centres, clamped to the edge
    if n_src == n_dst:
        idx = np.arange(n_dst)
        return idx, idx, np.zeros(n_dst)
    pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, pos - i0


def resize_bilinear(img, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resize with edge clamping.

    Accepts ``(H, W)`` maps as well as ``(H, W, C)`` images and returns the
    same rank it was given.
    """
    if int(target_w) < 1 or int(target_h) < 1:
        raise InvalidArgumentError(f"target size must be >= 1x1, got {target_w}x{target_h}")
    arr = np.asarray(img)
    squeeze = arr.ndim == 2
    arr = check_image(arr, channels=range(1, 1 << 16))
    h, w, _ = arr.shape
    if (w, h) == (target_w, target_h):
        out = arr.copy()
    else:
        y0, y1, wy = _axis_samples(h, target_h)
        x0, x1, wx = _axis_samples(w, target_w)
        top = arr[y0]
        rows = top + wy[:, None, None] * (arr[y1] - top)
        left = rows[:, x0]
        out = left + wx[None, :, None] * (rows[:, x1] - left)
    return out[:, :, 0] if squeeze else out


def to_luma(img) -> np.ndarray:
    """Single-channel luma; exact on gray pixels (``r == g == b``)."""
    arr = check_image(img)
    if arr.shape[2] == 1:
        return arr[:, :, 0].copy()
    r, g, b = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
    # same value as 0.299r + 0.587g + 0.114b, rearranged around g
    return g + LUMA_WEIGHTS[0] * (r - g) + LUMA_WEIGHTS[2] * (b - g)


def adjust_photometric(img, brightness_delta: float = 0.0, contrast_factor: float = 1.0,
                       saturation_factor: float = 1.0) -> np.ndarray:
    """Brightness (8-bit units), contrast about mid-gray, then saturation about luma.

    Alpha, if present, passes through untouched. Identity parameters return
    an exact copy.
    """
    arr = check_image(img, channels=(3, 4))
    out = arr.copy()
    rgb = out[:, :, :3]
    if brightness_delta != 0:
        rgb += brightness_delta / 255.0
    if contrast_factor != 1:
        rgb[...] = (rgb - 0.5) * contrast_factor + 0.5
    if saturation_factor != 1:
        luma = to_luma(rgb)[:, :, None]
        rgb[...] = luma + saturation_factor * (rgb - luma)
    np.clip(rgb, 0.0, 1.0, out=rgb)
    return out


def clamp01(m) -> np.ndarray:
    return np.clip(check_map(m), 0.0, 1.0)
