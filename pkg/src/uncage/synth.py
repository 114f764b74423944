"""Synthetic cage-occlusion dataset generation.

A cage asset (RGBA) is resized, zoomed, photometrically jittered and alpha
blended over an animal image (RGB); the ground-truth mask is ``alpha > 0`` of
the augmented cage. Each (animal, cage) composite is then written out
``post_aug_copies`` times, each copy with its own full-image photometric
jitter that leaves the mask untouched.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._validation import check_image
from .exceptions import InvalidArgumentError, SchemaError
from .imaging import adjust_photometric, resize_bilinear
from .io import read_image, write_image, write_json, write_mask
from .rng import Xorshift64Star, derive_seed

MANIFEST_VERSION = 1
_COMPOSE_STREAM, _POST_STREAM, _SELECT_STREAM = 0, 1, 2


def _interval(name, value):
    lo, hi = (float(v) for v in value)
    if lo > hi:
        raise InvalidArgumentError(f"{name} low {lo} exceeds high {hi}")
    return (lo, hi)


@dataclass(frozen=True)
class SynthConfig:
    target_w: int = 512
    target_h: int = 288
    zoom_range: tuple = (0.8, 1.2)
    brightness_range: tuple = (-30.0, 30.0)
    contrast_range: tuple = (0.8, 1.3)
    saturation_range: tuple = (0.7, 1.4)
    post_aug_copies: int = 3
    post_augment: bool = True
    alpha_gain: float = 1.0
    rng_seed: int = 0
    cages_per_animal: int | None = None  # None: every cage with every animal
    val_fraction: float = 0.2
    emit_clean: bool = True

    def __post_init__(self):
        for name in ("zoom_range", "brightness_range", "contrast_range", "saturation_range"):
            object.__setattr__(self, name, _interval(name, getattr(self, name)))
        if self.post_aug_copies < 1:
            raise InvalidArgumentError("post_aug_copies must be >= 1")
        if not 0.0 < self.alpha_gain <= 1.0:
            raise InvalidArgumentError("alpha_gain must lie in (0, 1]")
        if self.target_w < 1 or self.target_h < 1:
            raise InvalidArgumentError("target size must be >= 1x1")
        if self.zoom_range[0] <= 0:
            raise InvalidArgumentError("zoom factors must be > 0")
        if not 0.0 <= self.val_fraction <= 1.0:
            raise InvalidArgumentError("val_fraction must lie in [0, 1]")
        if self.cages_per_animal is not None and self.cages_per_animal < 1:
            raise InvalidArgumentError("cages_per_animal must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def zoom_crop_or_pad(rgba, factor: float) -> np.ndarray:
    """Centre crop (factor > 1) or transparent pad (factor < 1), then resize back."""
    h, w, c = rgba.shape
    cw, ch = max(1, round(w / factor)), max(1, round(h / factor))
    if (cw, ch) == (w, h):
        return rgba.copy()
    canvas = np.zeros((max(ch, h), max(cw, w), c))
    oy, ox = (canvas.shape[0] - h) // 2, (canvas.shape[1] - w) // 2
    canvas[oy:oy + h, ox:ox + w] = rgba
    cy, cx = (canvas.shape[0] - ch) // 2, (canvas.shape[1] - cw) // 2
    return resize_bilinear(canvas[cy:cy + ch, cx:cx + cw], w, h)


def sample_photometric(rng: Xorshift64Star, config: SynthConfig) -> dict:
    return {
        "brightness": rng.uniform(*config.brightness_range),
        "contrast": rng.uniform(*config.contrast_range),
        "saturation": rng.uniform(*config.saturation_range),
    }


def apply_photometric(img, p: dict) -> np.ndarray:
    return adjust_photometric(img, p["brightness"], p["contrast"], p["saturation"])


def alpha_blend(cage_rgb, animal_rgb, alpha) -> np.ndarray:
    """``alpha * cage + (1 - alpha) * animal``, kept inside the two endpoints."""
    a = np.asarray(alpha, dtype=np.float64)[..., None]
    out = a * cage_rgb + (1.0 - a) * animal_rgb
    return np.clip(out, np.minimum(cage_rgb, animal_rgb), np.maximum(cage_rgb, animal_rgb))


def compose(animal, cage, config: SynthConfig, rng: Xorshift64Star):
    """Blend one augmented cage over one animal.

    Returns ``(image, mask, record, animal_resized)``; ``record`` holds every
    sampled parameter.
    """
    animal = check_image(animal, channels=(3, 4), name="animal")[:, :, :3]
    cage = check_image(cage, channels=(1, 2, 3, 4), name="cage")
    if cage.shape[2] != 4:
        raise InvalidArgumentError("cage asset must be RGBA (alpha channel required)")
    w, h = config.target_w, config.target_h
    animal = resize_bilinear(animal, w, h)
    cage = resize_bilinear(cage, w, h)

    zoom = rng.uniform(*config.zoom_range)
    cage = zoom_crop_or_pad(cage, zoom)
    photo = sample_photometric(rng, config)
    cage = apply_photometric(cage, photo)

    alpha = np.clip(cage[:, :, 3], 0.0, 1.0)
    mask = alpha > 0
    image = alpha_blend(cage[:, :, :3], animal, alpha * config.alpha_gain)
    record = {"zoom": zoom, "cage_photometric": photo, "alpha_gain": config.alpha_gain}
    return image, mask, record, animal


def split_for(animal_id: str, val_fraction: float = 0.2) -> str:
    """Hash split: every sample of one animal lands in the same split."""
    bucket = int(hashlib.sha256(animal_id.encode()).hexdigest()[:8], 16) % 10000
    return "val" if bucket < round(val_fraction * 10000) else "train"


def _list_pngs(directory, what):
    d = Path(directory)
    if not d.is_dir():
        raise InvalidArgumentError(f"{what} directory {d} does not exist")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise InvalidArgumentError(f"no PNG {what} found in {d}")
    return files


def load_keypoints(path):
    """Instances from a keypoint JSON: either ``{instances: [...]}`` or a one-frame file."""
    with open(path) as fh:
        data = json.load(fh)
    if "frames" in data:
        if len(data["frames"]) != 1:
            raise SchemaError(f"{path}: expected exactly one frame", record=str(path))
        data = data["frames"][0]
    if "instances" not in data:
        raise SchemaError(f"{path}: missing 'instances'", record=str(path))
    return data["instances"]


def transform_keypoints(instances, sx: float, sy: float, mask: np.ndarray):
    """Scale to the output raster and demote visible joints within 1 px of the mask."""
    h, w = mask.shape
    out = []
    for inst in instances:
        kps = []
        for x, y, v in inst["keypoints"]:
            x, y, v = float(x) * sx, float(y) * sy, int(v)
            if v == 2:
                cx, cy = int(round(x)), int(round(y))
                y0, y1 = max(cy - 1, 0), min(cy + 2, h)
                x0, x1 = max(cx - 1, 0), min(cx + 2, w)
                if y0 < y1 and x0 < x1 and mask[y0:y1, x0:x1].any():
                    v = 1
            kps.append([x, y, v])
        bx, by, bw, bh = (float(b) for b in inst["bbox"])
        new = dict(inst)
        new["keypoints"] = kps
        new["bbox"] = [bx * sx, by * sy, bw * sx, bh * sy]
        out.append(new)
    return out


def _select_cages(n_cages, animal_index, config):
    if config.cages_per_animal is None or config.cages_per_animal >= n_cages:
        return list(range(n_cages))
    rng = Xorshift64Star(derive_seed(config.rng_seed, _SELECT_STREAM, animal_index))
    pool = list(range(n_cages))
    picked = []
    for _ in range(config.cages_per_animal):
        picked.append(pool.pop(rng.integers(len(pool))))
    return sorted(picked)


def _render_pair(job, config, out_dir):
    pair_index, animal_path, cage_path = job
    animal = read_image(animal_path)
    cage = read_image(cage_path)
    rng = Xorshift64Star(derive_seed(config.rng_seed, _COMPOSE_STREAM, pair_index))
    composite, mask, compose_rec, animal_rs = compose(animal, cage, config, rng)
    kp_path = Path(animal_path).with_suffix(".json")
    instances = load_keypoints(kp_path) if kp_path.exists() else None
    split = split_for(Path(animal_path).stem, config.val_fraction)

    records = []
    for copy in range(config.post_aug_copies):
        index = pair_index * config.post_aug_copies + copy
        sid = f"{index:06d}"
        sample_seed = derive_seed(config.rng_seed, _POST_STREAM, index)
        post = None
        image, clean = composite, animal_rs
        if config.post_augment:
            post = sample_photometric(Xorshift64Star(sample_seed), config)
            image = apply_photometric(composite, post)
            clean = apply_photometric(animal_rs, post)
        rec = {
            "index": index,
            "id": sid,
            "split": split,
            "animal": str(animal_path),
            "cage": str(cage_path),
            "pair_index": pair_index,
            "copy": copy,
            "rng_seed": config.rng_seed,
            "sample_seed": sample_seed,
            "compose": compose_rec,
            "post_photometric": post,
            "width": config.target_w,
            "height": config.target_h,
            "image": f"images/{sid}.png",
            "mask": f"masks/{sid}.png",
        }
        write_image(out_dir / rec["image"], image)
        write_mask(out_dir / rec["mask"], mask)
        if config.emit_clean:
            rec["clean"] = f"clean/{sid}.png"
            write_image(out_dir / rec["clean"], clean)
        if instances is not None:
            h0, w0 = animal.shape[:2]
            kp = transform_keypoints(instances, config.target_w / w0, config.target_h / h0, mask)
            rec["keypoints"] = f"keypoints/{sid}.json"
            write_json(out_dir / rec["keypoints"], {"frames": [{"frame_id": sid, "instances": kp}]})
        records.append(rec)
    return records


def generate_dataset(animal_dir, cage_dir, config: SynthConfig | None = None, out_dir=".",
                     jobs: int = 1) -> dict:
    """Render ``|animals| x |cages| x post_aug_copies`` samples and ``manifest.json``."""
    config = config or SynthConfig()
    animals = _list_pngs(animal_dir, "animals")
    cages = _list_pngs(cage_dir, "cages")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    work = []
    for ai, a in enumerate(animals):
        for ci in _select_cages(len(cages), ai, config):
            work.append((len(work), a, cages[ci]))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda j: _render_pair(j, config, out), work))
    else:
        chunks = [_render_pair(j, config, out) for j in work]
    samples = sorted((r for chunk in chunks for r in chunk), key=lambda r: r["index"])

    manifest = {
        "version": MANIFEST_VERSION,
        "config": config.to_dict(),
        "conventions": {
            "luma": "rec601",
            "mask_rule": "alpha > 0",
            "zoom": "centre crop-or-pad then bilinear resize",
            "rng": "xorshift64* seeded by splitmix64",
        },
        "animal_dir": str(animal_dir),
        "cage_dir": str(cage_dir),
        "samples": samples,
    }
    write_json(out / "manifest.json", manifest)
    return manifest
