"""PNG codecs for images, probability maps and masks.

* images: 8-bit RGB/RGBA (or gray), samples divided by 255 on load;
* probability maps: 16-bit single channel, ``p = sample / 65535``;
* masks: 8-bit single channel, ``{0, 255}``, anything non-zero reads as True.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import check_image, check_map, check_mask


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA", "L"):
            im = im.convert("RGBA" if "A" in im.getbands() else "RGB")
        arr = np.asarray(im)
    if arr.dtype == np.uint16:
        data = arr.astype(np.float64) / 65535.0
    else:
        data = arr.astype(np.float64) / 255.0
    return data[:, :, None] if data.ndim == 2 else data


def to_uint8(img) -> np.ndarray:
    arr = check_image(img)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def write_image(path, img) -> None:
    data = to_uint8(img)
    if data.shape[2] == 1:
        data = data[:, :, 0]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path, format="PNG")


def read_probability(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    # 8-bit maps are accepted too, at 1/255 resolution
    scale = 255.0 if arr.dtype == np.uint8 else 65535.0
    return arr.astype(np.float64) / scale


def write_probability(path, prob) -> None:
    data = np.clip(np.rint(check_map(prob) * 65535.0), 0, 65535).astype(np.uint16)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path, format="PNG")


def read_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr > 0


def write_mask(path, mask) -> None:
    data = check_mask(mask).astype(np.uint8) * 255
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path, format="PNG")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
