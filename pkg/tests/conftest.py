import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def stripes(h=64, w=64, period=8, channels=3):
    x = np.arange(w)
    row = 0.5 + 0.4 * np.sin(2 * np.pi * x / period + 0.3)
    return np.repeat(np.broadcast_to(row, (h, w))[:, :, None], channels, axis=2).copy()


def grating(alpha, n=64, wavelength=4.0, phase=0.7):
    y, x = np.mgrid[0:n, 0:n].astype(float)
    return 0.5 + 0.4 * np.cos(2 * np.pi * (x * np.cos(alpha) + y * np.sin(alpha)) / wavelength + phase)
