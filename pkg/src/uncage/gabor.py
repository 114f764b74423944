"""Tunable Gabor filter bank and orientation confidence.

Kernels follow the even/odd cosine Gabor

    w(x, y) = exp(-(x'^2 / sx^2 + y'^2 / sy^2) / 2) * cos(2 pi x' / lambda + phase)
    x' =  x cos(theta) + y sin(theta)
    y' = -x sin(theta) + y cos(theta)

with ``x`` along columns and ``y`` down the rows, so a filter at ``theta``
responds most to a grating whose intensity varies along ``(cos theta, sin theta)``.
Orientation ``k`` of an ``n``-filter bank sits at ``pi * k / n``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_finite, check_image, check_map
from .exceptions import InvalidArgumentError
from .imaging import to_luma

DEFAULT_BATCH = 6


@dataclass(frozen=True)
class GaborParams:
    sigma_x: float = 1.8
    sigma_y: float = 2.4
    wavelength: float = 4.0
    phase: float = 0.0
    n_orientations: int = 72
    kernel_radius: int | None = None  # None: ceil(3 * max(sigma_x, sigma_y))
    zero_mean: bool = True

    def __post_init__(self):
        check_finite(sigma_x=self.sigma_x, sigma_y=self.sigma_y,
                     wavelength=self.wavelength, phase=self.phase)
        if self.sigma_x <= 0 or self.sigma_y <= 0 or self.wavelength <= 0:
            raise InvalidArgumentError("sigma_x, sigma_y and wavelength must be > 0")
        if int(self.n_orientations) < 2:
            raise InvalidArgumentError("n_orientations must be >= 2")
        if self.kernel_radius is not None and int(self.kernel_radius) < 1:
            raise InvalidArgumentError("kernel_radius must be >= 1")

    @property
    def radius(self) -> int:
        if self.kernel_radius is not None:
            return int(self.kernel_radius)
        return int(math.ceil(3.0 * max(self.sigma_x, self.sigma_y)))

    @property
    def thetas(self) -> np.ndarray:
        n = int(self.n_orientations)
        return np.pi * np.arange(n) / n

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel_radius"] = self.radius
        return d


@dataclass(frozen=True)
class GaborKernel:
    theta: float
    weights: np.ndarray  # (2r+1, 2r+1), indexed [r + y, r + x]

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@dataclass
class GaborBankResult:
    thetas: np.ndarray          # (n,)
    responses: np.ndarray       # (n, H, W), |correlation|
    max_response: np.ndarray    # (H, W)
    theta_index: np.ndarray     # (H, W) int, lowest index on ties
    variance: np.ndarray = field(default=None)  # (H, W)

    @property
    def theta_best(self) -> np.ndarray:
        return self.thetas[self.theta_index]


def make_kernel(params: GaborParams, theta: float) -> GaborKernel:
    """Sample the Gabor function on the integer grid ``[-r, r]^2``.

    Weights are the raw formula values; the mean is removed later, when the
    bank is applied (see ``GaborParams.zero_mean``).
    """
    check_finite(theta=theta)
    r = params.radius
    y, x = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    c, s = math.cos(theta), math.sin(theta)
    xr = x * c + y * s
    yr = -x * s + y * c
    env = np.exp(-0.5 * (xr ** 2 / params.sigma_x ** 2 + yr ** 2 / params.sigma_y ** 2))
    w = env * np.cos(2.0 * np.pi * xr / params.wavelength + params.phase)
    return GaborKernel(theta=float(theta), weights=w)


def make_bank(params: GaborParams) -> list[GaborKernel]:
    return [make_kernel(params, t) for t in params.thetas]


def _kernel_stack(params: GaborParams) -> np.ndarray:
    ws = np.stack([k.weights for k in make_bank(params)])
    if params.zero_mean:
        ws = ws - ws.mean(axis=(1, 2), keepdims=True)
    return ws


@numba.njit(cache=True)
def _correlate_batch(padded, kernels, out):
    # Accumulates taps in row-major kernel order; shared with the numpy path
    # so both produce identical bits.
    nk, ks, _ = kernels.shape
    h, w = out.shape[1], out.shape[2]
    for k in range(nk):
        o = out[k]
        for y in range(h):
            for x in range(w):
                o[y, x] = 0.0
        for dy in range(ks):
            for dx in range(ks):
                wt = kernels[k, dy, dx]
                for y in range(h):
                    row = padded[y + dy]
                    for x in range(w):
                        o[y, x] = o[y, x] + wt * row[x + dx]


def _correlate_naive(padded, kernel, h, w):
    ks = kernel.shape[0]
    out = np.zeros((h, w))
    for dy in range(ks):
        for dx in range(ks):
            out = out + kernel[dy, dx] * padded[dy:dy + h, dx:dx + w]
    return out


def correlate_bank(gray, kernels: np.ndarray, *, batch_size: int | None = DEFAULT_BATCH) -> np.ndarray:
    """Signed correlation of ``gray`` with every kernel, edge-replicated borders.

    ``batch_size=None`` runs the plain per-orientation numpy loop; otherwise
    orientations are processed ``batch_size`` at a time by the compiled kernel.
    """
    gray = check_map(gray, name="gray image")
    ks = kernels.shape[1]
    r = ks // 2
    h, w = gray.shape
    if h < ks or w < ks:
        raise InvalidArgumentError(f"image {w}x{h} is smaller than the {ks}x{ks} kernel")
    padded = np.pad(gray, r, mode="edge")
    n = kernels.shape[0]
    out = np.empty((n, h, w))
    if batch_size is None:
        for k in range(n):
            out[k] = _correlate_naive(padded, kernels[k], h, w)
        return out
    if batch_size < 1:
        raise InvalidArgumentError("batch_size must be >= 1")
    kernels = np.ascontiguousarray(kernels, dtype=np.float64)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        _correlate_batch(padded, kernels[start:stop], out[start:stop])
    return out


def orient_diff(theta_best, theta):
    """Minimum circular distance between orientations (period pi), in [0, pi/2]."""
    d = np.subtract(theta_best, theta)
    return np.minimum(np.abs(d), np.minimum(np.abs(d - np.pi), np.abs(d + np.pi)))


def confidence_variance(result: GaborBankResult) -> np.ndarray:
    """``sqrt(sum_k orient_diff(theta_best, theta_k) * (r_k - r_max)^2)`` per pixel."""
    best = result.theta_best
    acc = np.zeros_like(result.max_response)
    for k, theta in enumerate(result.thetas):
        dev = result.responses[k] - result.max_response
        acc += orient_diff(best, theta) * dev * dev
    return np.sqrt(acc)


def bank_response(img, params: GaborParams | None = None, *,
                  batch_size: int | None = DEFAULT_BATCH) -> GaborBankResult:
    """Magnitude responses of the whole bank, dominant orientation and variance.

    RGB(A) inputs are reduced to luma first.
    """
    params = params or GaborParams()
    arr = np.asarray(img)
    gray = arr if arr.ndim == 2 else to_luma(check_image(arr)[:, :, :3] if arr.shape[2] == 4 else arr)
    responses = np.abs(correlate_bank(gray, _kernel_stack(params), batch_size=batch_size))
    idx = np.argmax(responses, axis=0)
    result = GaborBankResult(
        thetas=params.thetas,
        responses=responses,
        max_response=np.take_along_axis(responses, idx[None], axis=0)[0],
        theta_index=idx,
    )
    result.variance = confidence_variance(result)
    return result


def rescale_by_max(values) -> np.ndarray:
    """Divide a non-negative map by its own maximum (all-zero maps stay zero)."""
    values = check_map(values)
    peak = values.max()
    return values / peak if peak > 0 else np.zeros_like(values)


def gabor_confidence(variance, threshold_low: float = 0.1, threshold_high: float = 0.2) -> np.ndarray:
    """Linear ramp of the variance between the two thresholds, clamped to [0, 1]."""
    if not threshold_high > threshold_low:
        raise InvalidArgumentError(
            f"threshold_high ({threshold_high}) must exceed threshold_low ({threshold_low})")
    v = check_map(variance, name="variance")
    return np.clip((v - threshold_low) / (threshold_high - threshold_low), 0.0, 1.0)


def orientation_channels(result: GaborBankResult, confidence, gate: float = 0.1):
    """``(sin, cos)`` of the dominant orientation, zeroed where confidence < gate."""
    if not 0.0 <= gate <= 1.0:
        raise InvalidArgumentError(f"gate must be in [0, 1], got {gate}")
    keep = check_map(confidence, name="confidence") >= gate
    best = result.theta_best
    return np.where(keep, np.sin(best), 0.0), np.where(keep, np.cos(best), 0.0)


def confidence_map(result: GaborBankResult, threshold_low: float = 0.1,
                   threshold_high: float = 0.2, rescale: bool = True) -> np.ndarray:
    """C_gabor for a bank result; ``rescale`` first divides the variance by its maximum."""
    v = rescale_by_max(result.variance) if rescale else result.variance
    return gabor_confidence(v, threshold_low, threshold_high)


def dump_debug(result: GaborBankResult, params: GaborParams, out_dir) -> Path:
    """Write responses, theta_best and variance as 16-bit PNGs plus a JSON sidecar."""
    from .io import write_json, write_probability

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    r_peak = float(result.responses.max()) or 1.0
    v_peak = float(result.variance.max()) or 1.0
    for k in range(len(result.thetas)):
        write_probability(out / f"response_{k:03d}.png", result.responses[k] / r_peak)
    write_probability(out / "theta_best.png", result.theta_best / np.pi)
    write_probability(out / "variance.png", result.variance / v_peak)
    write_json(out / "gabor.json", {
        "params": params.to_dict(),
        "response_scale": r_peak,
        "variance_scale": v_peak,
        "theta_best_scale": math.pi,
    })
    return out


class GaborOrientationTransformer(TransformerMixin, BaseEstimator):
    """Estimator wrapper: image -> (H, W, 2) gated ``[sin, cos]`` orientation channels.

    ``fit`` only validates parameters and builds the kernel bank; nothing is
    learned from data.
    """

    def __init__(self, sigma_x=1.8, sigma_y=2.4, wavelength=4.0, phase=0.0,
                 n_orientations=72, kernel_radius=None, threshold_low=0.1,
                 threshold_high=0.2, rescale=True, gate=0.1, batch_size=DEFAULT_BATCH):
        self.sigma_x = sigma_x
        self.sigma_y = sigma_y
        self.wavelength = wavelength
        self.phase = phase
        self.n_orientations = n_orientations
        self.kernel_radius = kernel_radius
        self.threshold_low = threshold_low
        self.threshold_high = threshold_high
        self.rescale = rescale
        self.gate = gate
        self.batch_size = batch_size

    def fit(self, X=None, y=None):
        self.params_ = GaborParams(self.sigma_x, self.sigma_y, self.wavelength, self.phase,
                                   int(self.n_orientations), self.kernel_radius)
        if not self.threshold_high > self.threshold_low:
            raise InvalidArgumentError("threshold_high must exceed threshold_low")
        self.kernels_ = make_bank(self.params_)
        return self

    def _params(self) -> GaborParams:
        if not hasattr(self, "params_"):
            self.fit()
        return self.params_

    def analyze(self, X) -> GaborBankResult:
        return bank_response(X, self._params(), batch_size=self.batch_size)

    def confidence(self, X) -> np.ndarray:
        return confidence_map(self.analyze(X), self.threshold_low, self.threshold_high, self.rescale)

    def transform(self, X):
        result = self.analyze(X)
        conf = confidence_map(result, self.threshold_low, self.threshold_high, self.rescale)
        s, c = orientation_channels(result, conf, self.gate)
        return np.stack([s, c], axis=-1)


def params_to_json(params: GaborParams) -> str:
    return json.dumps(params.to_dict(), sort_keys=True)
