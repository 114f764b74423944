"""Procedural stand-ins for cage and animal assets (fixtures, demos, smoke tests)."""
from __future__ import annotations

import math

import numpy as np

from .rng import Xorshift64Star


def bar_cage(width: int, height: int, spacing: float = 48.0, bar_width: float = 12.0,
             angle_deg: float = 0.0, offset: float = 0.0, color=(0.45, 0.45, 0.5),
             shading: float = 0.25) -> np.ndarray:
    """RGBA grid of parallel straight bars with anti-aliased edges.

    ``angle_deg`` is the direction of the bar normal (0: vertical bars).
    Bars get a cylindrical highlight across their width.
    """
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    a = math.radians(angle_deg)
    u = x * math.cos(a) + y * math.sin(a) - offset
    # distance from the nearest bar centre line, in pixels
    d = np.abs((u + spacing / 2.0) % spacing - spacing / 2.0)
    alpha = np.clip(bar_width / 2.0 + 0.5 - d, 0.0, 1.0)
    profile = np.cos(np.clip(d / max(bar_width / 2.0, 1e-9), 0.0, 1.0) * (math.pi / 2.0))
    rgb = np.clip(np.asarray(color)[None, None, :] * (1.0 - shading + 2.0 * shading * profile[:, :, None]), 0, 1)
    return np.concatenate([rgb, alpha[:, :, None]], axis=2)


def flat_animal(width: int, height: int, seed: int = 0) -> np.ndarray:
    """Flat background with one smooth, softly shaded elliptical blob."""
    rng = Xorshift64Star(seed)
    bg = np.array([rng.uniform(0.25, 0.75) for _ in range(3)])
    fg = np.array([rng.uniform(0.2, 0.8) for _ in range(3)])
    cx, cy = rng.uniform(0.35, 0.65) * width, rng.uniform(0.35, 0.65) * height
    rx, ry = rng.uniform(0.15, 0.3) * width, rng.uniform(0.2, 0.35) * height
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    blob = np.exp(-(((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2))
    return np.clip(bg + blob[:, :, None] * (fg - bg), 0.0, 1.0)
