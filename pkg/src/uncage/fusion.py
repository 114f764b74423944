"""Confidence-guided fusion of a base probability map with the Gabor confidence."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage
from scipy.special import expit
from sklearn.base import BaseEstimator

from ._validation import check_mask, check_map, check_odd, check_same_size
from .exceptions import InvalidArgumentError
from .gabor import GaborParams, bank_response, confidence_map


@dataclass(frozen=True)
class FusionParams:
    confidence_boost: float = 0.4
    mask_threshold: float = 0.3
    dilate_kernel: int = 3
    dilate_iterations: int = 0  # dilation is opt-in

    def __post_init__(self):
        if self.confidence_boost < 0:
            raise InvalidArgumentError("confidence_boost must be >= 0")
        if not 0.0 < self.mask_threshold < 1.0:
            raise InvalidArgumentError("mask_threshold must lie in (0, 1)")
        check_odd(self.dilate_kernel, "dilate_kernel")
        if self.dilate_iterations < 0:
            raise InvalidArgumentError("dilate_iterations must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def sigmoid(x):
    """Logistic function, elementwise and overflow-free."""
    return expit(x)


def fuse(p_base, c_gabor, params: FusionParams | None = None):
    """Return ``(p_enhanced, mask)`` with ``mask = clamp(p_base + boost * c) > threshold``."""
    params = params or FusionParams()
    p_base = check_map(p_base, name="p_base")
    c_gabor = check_map(c_gabor, name="c_gabor")
    check_same_size(p_base, c_gabor, ("p_base", "c_gabor"))
    p_enhanced = np.clip(p_base + c_gabor * params.confidence_boost, 0.0, 1.0)
    return p_enhanced, p_enhanced > params.mask_threshold


def dilate(mask, kernel: int = 3, iterations: int = 1) -> np.ndarray:
    """Binary dilation by a ``kernel x kernel`` square, repeated ``iterations`` times."""
    kernel = check_odd(kernel, "kernel")
    mask = check_mask(mask)
    if iterations < 0:
        raise InvalidArgumentError("iterations must be >= 0")
    if iterations == 0 or kernel == 1 or not mask.any():
        return mask.copy()
    # scipy treats iterations < 1 as "until stable", hence the guard above
    return ndimage.binary_dilation(mask, structure=np.ones((kernel, kernel), bool),
                                   iterations=int(iterations))


def segment(image, p_base, gabor: GaborParams | None = None, fusion: FusionParams | None = None,
            threshold_low: float = 0.1, threshold_high: float = 0.2, rescale: bool = True):
    """Full segmentation stage: Gabor confidence, fusion, optional dilation.

    Returns ``(mask, p_enhanced, c_gabor, bank_result)``.
    """
    fusion = fusion or FusionParams()
    result = bank_response(image, gabor or GaborParams())
    c_gabor = confidence_map(result, threshold_low, threshold_high, rescale)
    p_enhanced, mask = fuse(p_base, c_gabor, fusion)
    if fusion.dilate_iterations:
        mask = dilate(mask, fusion.dilate_kernel, fusion.dilate_iterations)
    return mask, p_enhanced, c_gabor, result


class CageMaskSegmenter(BaseEstimator):
    """Estimator wrapper around :func:`segment`.

    ``predict(image, p_base)`` returns the boolean cage mask and
    ``predict_proba(image, p_base)`` the enhanced probability map. Set
    ``logits=True`` when ``p_base`` holds raw network outputs.
    """

    def __init__(self, sigma_x=1.8, sigma_y=2.4, wavelength=4.0, phase=0.0, n_orientations=72,
                 kernel_radius=None, threshold_low=0.1, threshold_high=0.2, rescale=True,
                 confidence_boost=0.4, mask_threshold=0.3, dilate_kernel=3,
                 dilate_iterations=0, logits=False):
        self.sigma_x = sigma_x
        self.sigma_y = sigma_y
        self.wavelength = wavelength
        self.phase = phase
        self.n_orientations = n_orientations
        self.kernel_radius = kernel_radius
        self.threshold_low = threshold_low
        self.threshold_high = threshold_high
        self.rescale = rescale
        self.confidence_boost = confidence_boost
        self.mask_threshold = mask_threshold
        self.dilate_kernel = dilate_kernel
        self.dilate_iterations = dilate_iterations
        self.logits = logits

    def fit(self, X=None, y=None):
        self.gabor_params_ = GaborParams(self.sigma_x, self.sigma_y, self.wavelength, self.phase,
                                         int(self.n_orientations), self.kernel_radius)
        self.fusion_params_ = FusionParams(self.confidence_boost, self.mask_threshold,
                                           self.dilate_kernel, self.dilate_iterations)
        return self

    def _run(self, X, p_base):
        if not hasattr(self, "fusion_params_"):
            self.fit()
        if self.logits:
            p_base = sigmoid(check_map(p_base, name="p_base"))
        return segment(X, p_base, self.gabor_params_, self.fusion_params_,
                       self.threshold_low, self.threshold_high, self.rescale)

    def predict(self, X, p_base):
        return self._run(X, p_base)[0]

    def predict_proba(self, X, p_base):
        return self._run(X, p_base)[1]
