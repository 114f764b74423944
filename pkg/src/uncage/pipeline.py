"""Stage runners shared by the CLI: file in, file out, plus a run manifest."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import UncageError
from .fusion import FusionParams, dilate, fuse, sigmoid
from .gabor import GaborParams, bank_response, confidence_map, dump_debug, orientation_channels
from .inpaint import InpaintParams, inpaint
from .io import (file_sha256, read_image, read_mask, read_probability, write_image, write_json,
                 write_mask, write_probability)

MANIFEST_NAME = "run.json"

DEFAULTS = {
    # Gabor bank
    "sigma_x": 1.8,
    "sigma_y": 2.4,
    "wavelength": 4.0,
    "phase": 0.0,
    "n_orientations": 72,
    "kernel_radius": None,
    "threshold_low": 0.1,
    "threshold_high": 0.2,
    "rescale": True,
    "gate": 0.1,
    # fusion
    "confidence_boost": 0.4,
    "mask_threshold": 0.3,
    "dilate": 3,
    "dilate_iters": 0,
    "logits": False,
    # inpainting
    "patch": 7,
    "levels": None,
    "iters": 5,
    "decay": 0.5,
    "seed": 42,
}


class StageError(UncageError):
    """Wraps a failure with the name of the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def gabor_params(cfg: dict) -> GaborParams:
    return GaborParams(cfg["sigma_x"], cfg["sigma_y"], cfg["wavelength"], cfg["phase"],
                       int(cfg["n_orientations"]), cfg["kernel_radius"])


def fusion_params(cfg: dict) -> FusionParams:
    return FusionParams(cfg["confidence_boost"], cfg["mask_threshold"], int(cfg["dilate"]),
                        int(cfg["dilate_iters"]))


def inpaint_params(cfg: dict) -> InpaintParams:
    return InpaintParams(int(cfg["patch"]), cfg["levels"], int(cfg["iters"]), cfg["decay"],
                         int(cfg["seed"]))


@dataclass
class RunRecord:
    subcommand: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)

    def add_input(self, name, path):
        self.inputs[name] = {"path": str(path), "sha256": file_sha256(path)}

    def add_output(self, name, path):
        self.outputs[name] = {"path": str(path), "sha256": file_sha256(path)}

    def write(self, path) -> dict:
        payload = {
            "tool": "uncage",
            "version": __version__,
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "duration_s": round(time.perf_counter() - self.started, 6),
        }
        write_json(path, payload)
        return payload


def _load_pbase(path, logits: bool) -> np.ndarray:
    p = read_probability(path)
    return sigmoid(p) if logits else p


def segment_arrays(image, p_base, cfg: dict):
    """Mask plus intermediates (``p_enhanced``, ``c_gabor``, bank result)."""
    result = bank_response(image, gabor_params(cfg))
    c_gabor = confidence_map(result, cfg["threshold_low"], cfg["threshold_high"], cfg["rescale"])
    fp = fusion_params(cfg)
    p_enhanced, mask = fuse(p_base, c_gabor, fp)
    if fp.dilate_iterations:
        mask = dilate(mask, fp.dilate_kernel, fp.dilate_iterations)
    return mask, p_enhanced, c_gabor, result


def _write_debug(debug_dir: Path, cfg, p_enhanced, c_gabor, result):
    dump_debug(result, gabor_params(cfg), debug_dir / "gabor")
    write_probability(debug_dir / "p_enhanced.png", p_enhanced)
    write_probability(debug_dir / "c_gabor.png", c_gabor)
    s, c = orientation_channels(result, c_gabor, cfg["gate"])
    write_probability(debug_dir / "orient_sin.png", (s + 1.0) / 2.0)
    write_probability(debug_dir / "orient_cos.png", (c + 1.0) / 2.0)


def run_gabor(image_path, out_dir, cfg: dict, responses: bool = False) -> dict:
    out = Path(out_dir)
    rec = RunRecord("gabor", dict(cfg))
    rec.add_input("image", image_path)
    img = read_image(image_path)
    params = gabor_params(cfg)
    result = bank_response(img, params)
    c_gabor = confidence_map(result, cfg["threshold_low"], cfg["threshold_high"], cfg["rescale"])
    s, c = orientation_channels(result, c_gabor, cfg["gate"])
    if responses:
        dump_debug(result, params, out / "responses")
    write_probability(out / "confidence.png", c_gabor)
    write_probability(out / "theta_best.png", result.theta_best / np.pi)
    peak = float(result.variance.max()) or 1.0
    write_probability(out / "variance.png", result.variance / peak)
    write_probability(out / "orient_sin.png", (s + 1.0) / 2.0)
    write_probability(out / "orient_cos.png", (c + 1.0) / 2.0)
    write_json(out / "gabor.json", {"params": params.to_dict(), "variance_scale": peak,
                                    "orientation_encoding": "(v + 1) / 2"})
    for name in ("confidence", "theta_best", "variance", "orient_sin", "orient_cos"):
        rec.add_output(name, out / f"{name}.png")
    return rec.write(out / MANIFEST_NAME)


def run_segment(image_path, pbase_path, out_mask, cfg: dict, debug_dir=None) -> dict:
    rec = RunRecord("segment", dict(cfg))
    rec.add_input("image", image_path)
    rec.add_input("pbase", pbase_path)
    img = read_image(image_path)
    p_base = _load_pbase(pbase_path, cfg["logits"])
    mask, p_enh, c_gabor, result = segment_arrays(img, p_base, cfg)
    write_mask(out_mask, mask)
    if debug_dir is not None:
        _write_debug(Path(debug_dir), cfg, p_enh, c_gabor, result)
    rec.add_output("mask", out_mask)
    return rec.write(Path(out_mask).with_name(Path(out_mask).stem + ".run.json"))


def run_inpaint(image_path, mask_path, out_path, cfg: dict) -> dict:
    rec = RunRecord("inpaint", dict(cfg))
    rec.add_input("image", image_path)
    rec.add_input("mask", mask_path)
    img = read_image(image_path)
    mask = read_mask(mask_path)
    write_image(out_path, inpaint(img, mask, inpaint_params(cfg)))
    rec.add_output("image", out_path)
    return rec.write(Path(out_path).with_name(Path(out_path).stem + ".run.json"))


def run_pipeline(image_path, pbase_path, out_dir, cfg: dict, debug: bool = False) -> dict:
    """Segmentation then inpainting; writes ``mask.png``, ``uncaged.png`` and ``run.json``.

    On failure every file this call created is removed and a
    :class:`StageError` names the failing stage.
    """
    out = Path(out_dir)
    rec = RunRecord("pipeline", dict(cfg))
    created: list[Path] = []
    existed = out.exists()
    stage = "load"
    try:
        rec.add_input("image", image_path)
        rec.add_input("pbase", pbase_path)
        img = read_image(image_path)
        p_base = _load_pbase(pbase_path, cfg["logits"])
        stage = "segment"
        mask, p_enh, c_gabor, result = segment_arrays(img, p_base, cfg)
        out.mkdir(parents=True, exist_ok=True)
        created.append(out / "mask.png")
        write_mask(out / "mask.png", mask)
        if debug:
            created.append(out / "debug")
            _write_debug(out / "debug", cfg, p_enh, c_gabor, result)
        stage = "inpaint"
        uncaged = inpaint(img[:, :, :3] if img.shape[2] == 4 else img, mask, inpaint_params(cfg))
        created.append(out / "uncaged.png")
        write_image(out / "uncaged.png", uncaged)
        stage = "manifest"
        rec.add_output("mask", out / "mask.png")
        rec.add_output("uncaged", out / "uncaged.png")
        created.append(out / MANIFEST_NAME)
        return rec.write(out / MANIFEST_NAME)
    except Exception as exc:
        _cleanup(created, out if not existed else None)
        if isinstance(exc, OSError) and stage == "load":
            raise
        raise StageError(stage, exc) from exc


def _cleanup(paths, created_dir):
    import shutil

    for p in paths:
        if p.is_dir():
            shutil.rmtree(p, ignore_errors=True)
        elif p.exists():
            p.unlink()
    if created_dir is not None and created_dir.exists() and not any(created_dir.iterdir()):
        created_dir.rmdir()
