"""Cage detection, removal and pose-metric toolkit.

Stages: a tunable Gabor bank scores oriented bar structure
(:mod:`uncage.gabor`), which boosts an external probability map into a cage
mask (:mod:`uncage.fusion`); masked pixels are re-synthesised by PatchMatch
(:mod:`uncage.inpaint`). :mod:`uncage.synth` renders training data and
:mod:`uncage.metrics` scores pose-estimator output.
"""
__version__ = "0.1.0"

from .exceptions import (InvalidArgumentError, SchemaError, UncageError, UndefinedMetricError,
                         UnsatisfiableError)
from .fusion import CageMaskSegmenter, FusionParams, dilate, fuse, sigmoid
from .gabor import (GaborOrientationTransformer, GaborParams, bank_response, confidence_map,
                    confidence_variance,
                    gabor_confidence, make_bank, make_kernel, orient_diff, orientation_channels)
from .imaging import adjust_photometric, clamp01, resize_bilinear
from .inpaint import InpaintParams, PatchMatchInpainter, inpaint, nnf_search
from .synth import SynthConfig, compose, generate_dataset

__all__ = [
    "CageMaskSegmenter", "FusionParams", "GaborOrientationTransformer", "GaborParams",
    "InpaintParams", "InvalidArgumentError", "PatchMatchInpainter", "SchemaError",
    "SynthConfig", "UncageError", "UndefinedMetricError", "UnsatisfiableError",
    "adjust_photometric", "bank_response", "clamp01", "compose", "confidence_map",
    "confidence_variance",
    "dilate", "fuse", "gabor_confidence", "generate_dataset", "inpaint", "make_bank",
    "make_kernel", "nnf_search", "orient_diff", "orientation_channels", "resize_bilinear",
    "sigmoid",
]
