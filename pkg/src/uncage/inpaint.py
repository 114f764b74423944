"""Coarse-to-fine PatchMatch hole filling.

Per pyramid level, the nearest-neighbour field (NNF) maps every *target*
pixel (one whose patch touches the hole) to the centre of a *source* patch
that lies fully inside the image and fully outside the hole. The coarsest
level starts from an onion-peel fill and a random NNF; finer levels inherit
the upsampled NNF. Each EM iteration re-scores the current NNF against the
current estimate, runs a forward and a backward PatchMatch sweep
(propagation, then exponentially shrinking random search), and re-synthesises
the hole by Gaussian-weighted patch voting.

Weighted means are accumulated as running means (``m += w / W * (v - m)``) so
a hole surrounded by one constant colour is reproduced exactly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_image, check_mask, check_odd, check_same_size
from .exceptions import InvalidArgumentError, UnsatisfiableError
from .rng import Xorshift64Star, derive_seed, nb_integers

MIN_LEVEL_SIDE = 32


@dataclass(frozen=True)
class InpaintParams:
    patch_size: int = 7
    pyramid_levels: int | None = None  # None: halve while the min side stays >= 32
    iterations_per_level: int = 5
    search_decay: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        check_odd(self.patch_size, "patch_size", minimum=3)
        if self.iterations_per_level < 1:
            raise InvalidArgumentError("iterations_per_level must be >= 1")
        if not 0.0 < self.search_decay < 1.0:
            raise InvalidArgumentError("search_decay must lie in (0, 1)")
        if self.pyramid_levels is not None and self.pyramid_levels < 1:
            raise InvalidArgumentError("pyramid_levels must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NnfField:
    """NNF at one pyramid level.

    ``offsets[y, x] = (sx, sy)`` is the source patch centre for target
    ``(x, y)``, ``-1`` for non-targets; ``cost`` is the per-sample mean squared
    difference (``inf`` for non-targets).
    """

    offsets: np.ndarray
    cost: np.ndarray
    targets: np.ndarray
    image: np.ndarray
    history: list = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    @property
    def total_cost(self) -> float:
        return float(self.cost[self.targets].sum())


# -- compiled kernels ---------------------------------------------------------

@numba.njit(cache=True)
def _patch_dist(img, ty, tx, sy, sx, half, limit):
    # mean squared difference over in-bounds target samples; inf once >= limit
    h, w, nc = img.shape
    y0, y1 = max(-half, -ty), min(half, h - 1 - ty)
    x0, x1 = max(-half, -tx), min(half, w - 1 - tx)
    count = (y1 - y0 + 1) * (x1 - x0 + 1)
    bound = limit * count
    total = 0.0
    for dy in range(y0, y1 + 1):
        for dx in range(x0, x1 + 1):
            for c in range(nc):
                d = img[ty + dy, tx + dx, c] - img[sy + dy, sx + dx, c]
                total += d * d
        if total >= bound:
            return np.inf
    return total / count


@numba.njit(cache=True)
def _score(img, nnf, cost, ty, tx, half):
    for i in range(ty.shape[0]):
        y, x = ty[i], tx[i]
        cost[y, x] = _patch_dist(img, y, x, nnf[y, x, 0], nnf[y, x, 1], half, np.inf)


@numba.njit(cache=True)
def _sweep(img, srcvalid, istarget, nnf, cost, ty, tx, half, decay, forward, state):
    h, w = srcvalid.shape
    n = ty.shape[0]
    step = 1 if forward else -1
    radius0 = max(h, w)
    for j in range(n):
        i = j if forward else n - 1 - j
        y, x = ty[i], tx[i]
        # propagation from the already-visited neighbours
        for k in range(2):
            ny = y - step if k == 0 else y
            nx = x if k == 0 else x - step
            if ny < 0 or ny >= h or nx < 0 or nx >= w or not istarget[ny, nx]:
                continue
            cy = nnf[ny, nx, 0] + (y - ny)
            cx = nnf[ny, nx, 1] + (x - nx)
            if cy < 0 or cy >= h or cx < 0 or cx >= w or not srcvalid[cy, cx]:
                continue
            if cy == nnf[y, x, 0] and cx == nnf[y, x, 1]:
                continue
            d = _patch_dist(img, y, x, cy, cx, half, cost[y, x])
            if d < cost[y, x]:
                cost[y, x] = d
                nnf[y, x, 0] = cy
                nnf[y, x, 1] = cx
        # random search around the current best
        r = float(radius0)
        while r >= 1.0:
            ri = int(r)
            # search window clipped to the image
            y0 = max(nnf[y, x, 0] - ri, 0)
            x0 = max(nnf[y, x, 1] - ri, 0)
            cy = y0 + nb_integers(state, min(nnf[y, x, 0] + ri, h - 1) - y0 + 1)
            cx = x0 + nb_integers(state, min(nnf[y, x, 1] + ri, w - 1) - x0 + 1)
            r *= decay
            if not srcvalid[cy, cx]:
                continue
            if cy == nnf[y, x, 0] and cx == nnf[y, x, 1]:
                continue
            d = _patch_dist(img, y, x, cy, cx, half, cost[y, x])
            if d < cost[y, x]:
                cost[y, x] = d
                nnf[y, x, 0] = cy
                nnf[y, x, 1] = cx


@numba.njit(cache=True)
def _vote(img, hole, nnf, weights, half):
    h, w, nc = img.shape
    out = img.copy()
    acc = np.zeros(nc)
    for y in range(h):
        for x in range(w):
            if not hole[y, x]:
                continue
            wsum = 0.0
            for dy in range(-half, half + 1):
                py = y - dy  # target centre whose patch covers (y, x) at offset dy
                if py < 0 or py >= h:
                    continue
                for dx in range(-half, half + 1):
                    px = x - dx
                    if px < 0 or px >= w:
                        continue
                    sy = nnf[py, px, 0]
                    if sy < 0:
                        continue
                    sx = nnf[py, px, 1]
                    wt = weights[dy + half, dx + half]
                    wsum += wt
                    f = wt / wsum
                    for c in range(nc):
                        v = img[sy + dy, sx + dx, c]
                        if wsum == wt:
                            acc[c] = v
                        else:
                            acc[c] += f * (v - acc[c])
            if wsum > 0.0:
                for c in range(nc):
                    out[y, x, c] = acc[c]
    return out


@numba.njit(cache=True)
def _onion_peel(img, hole):
    h, w, nc = img.shape
    out = img.copy()
    filled = ~hole
    remaining = 0
    for y in range(h):
        for x in range(w):
            if hole[y, x]:
                remaining += 1
    ring_y = np.empty(h * w, np.int64)
    ring_x = np.empty(h * w, np.int64)
    acc = np.zeros(nc)
    while remaining > 0:
        m = 0
        for y in range(h):
            for x in range(w):
                if filled[y, x]:
                    continue
                cnt = 0
                for dy in range(-1, 2):
                    for dx in range(-1, 2):
                        yy, xx = y + dy, x + dx
                        if (dy != 0 or dx != 0) and 0 <= yy < h and 0 <= xx < w and filled[yy, xx]:
                            cnt += 1
                            for c in range(nc):
                                if cnt == 1:
                                    acc[c] = out[yy, xx, c]
                                else:
                                    acc[c] += (out[yy, xx, c] - acc[c]) / cnt
                if cnt > 0:
                    for c in range(nc):
                        # staged in the hole pixel itself; it is not read until marked filled
                        out[y, x, c] = acc[c]
                    ring_y[m] = y
                    ring_x[m] = x
                    m += 1
        if m == 0:
            break
        for i in range(m):
            filled[ring_y[i], ring_x[i]] = True
        remaining -= m
    return out


# -- level bookkeeping -------------------------------------------------------

def _downsample(img: np.ndarray, hole: np.ndarray):
    h, w, c = img.shape
    hh, ww = (h + 1) // 2, (w + 1) // 2
    out = np.zeros((hh, ww, c))
    cnt = np.zeros((hh, ww))
    hole_out = np.zeros((hh, ww), bool)
    for oy in range(2):
        for ox in range(2):
            sub = img[oy::2, ox::2]
            known = ~hole[oy::2, ox::2]
            sh, sw = known.shape
            hole_out[:sh, :sw] |= ~known
            region = out[:sh, :sw]
            rc = cnt[:sh, :sw]
            rc += known
            first = known & (rc == 1)
            region[first] = sub[first]
            later = known & (rc > 1)
            region[later] += (sub[later] - region[later]) / rc[later][:, None]
    return out, hole_out


def auto_levels(h: int, w: int) -> int:
    side = min(h, w)
    levels = 1
    while side // 2 >= MIN_LEVEL_SIDE:
        side //= 2
        levels += 1
    return levels


def build_pyramid(img: np.ndarray, hole: np.ndarray, levels: int):
    pyr = [(img, hole)]
    for _ in range(levels - 1):
        pyr.append(_downsample(*pyr[-1]))
    return pyr


def _level_geometry(hole: np.ndarray, patch: int):
    half = patch // 2
    h, w = hole.shape
    square = np.ones((patch, patch), bool)
    blocked = ndimage.binary_dilation(hole, structure=square) if hole.any() else hole.copy()
    srcvalid = ~blocked
    srcvalid[:half] = srcvalid[h - half:] = False
    srcvalid[:, :half] = srcvalid[:, w - half:] = False
    targets = blocked  # pixels within half of the hole
    ty, tx = np.nonzero(targets)
    return srcvalid, targets, ty.astype(np.int64), tx.astype(np.int64)


def _gaussian_weights(patch: int) -> np.ndarray:
    half = patch // 2
    sigma = patch / 3.0
    d = np.arange(-half, half + 1, dtype=np.float64)
    return np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma ** 2))


def _random_nnf(shape, ty, tx, src, rng: Xorshift64Star):
    nnf = np.full(shape + (2,), -1, np.int64)
    for y, x in zip(ty, tx):
        nnf[y, x] = src[rng.integers(len(src))]
    return nnf


def _upsample_nnf(coarse, shape, ty, tx, srcvalid, src, rng: Xorshift64Star):
    nnf = np.full(shape + (2,), -1, np.int64)
    ch, cw = coarse.shape[:2]
    h, w = shape
    for y, x in zip(ty, tx):
        cy, cx = min(y // 2, ch - 1), min(x // 2, cw - 1)
        sy, sx = coarse[cy, cx]
        if sy >= 0:
            sy, sx = 2 * sy + (y & 1), 2 * sx + (x & 1)
            if 0 <= sy < h and 0 <= sx < w and srcvalid[sy, sx]:
                nnf[y, x] = (sy, sx)
                continue
        nnf[y, x] = src[rng.integers(len(src))]
    return nnf


def _check_inputs(img, mask):
    img = check_image(img)
    mask = check_mask(mask)
    check_same_size(img, mask, ("image", "mask"))
    if mask.all():
        raise UnsatisfiableError("mask covers the whole image; nothing to copy from")
    return img, mask


def _field(img, nnf, cost, targets, history):
    offsets = nnf[:, :, ::-1].copy()
    offsets[~targets] = -1
    c = cost.copy()
    c[~targets] = np.inf
    return NnfField(offsets=offsets, cost=c, targets=targets, image=img, history=history)


# -- public API --------------------------------------------------------------

def nnf_search(img, mask, params: InpaintParams | None = None, level: int = 0) -> NnfField:
    """PatchMatch search at one pyramid level against a fixed hole estimate.

    The hole is pre-filled by onion peeling, the NNF is initialised at
    random, and ``iterations_per_level`` alternating sweeps follow.
    ``history`` holds the total cost after initialisation and after every sweep.
    """
    params = params or InpaintParams()
    img, mask = _check_inputs(img, mask)
    levels = params.pyramid_levels or auto_levels(*mask.shape)
    if not 0 <= level < levels:
        raise InvalidArgumentError(f"level {level} outside pyramid of {levels} levels")
    lvl_img, hole = build_pyramid(img, mask, level + 1)[level]
    half = params.patch_size // 2
    srcvalid, targets, ty, tx = _level_geometry(hole, params.patch_size)
    src = np.argwhere(srcvalid)
    if len(src) == 0:
        raise UnsatisfiableError(f"no hole-free {params.patch_size}x{params.patch_size} source patch at level {level}")
    est = _onion_peel(lvl_img, hole)
    rng = Xorshift64Star(derive_seed(params.rng_seed, level))
    nnf = _random_nnf(hole.shape, ty, tx, src, rng)
    cost = np.full(hole.shape, np.inf)
    _score(est, nnf, cost, ty, tx, half)
    history = [float(cost[targets].sum())]
    state = rng.state_array()
    for it in range(params.iterations_per_level):
        _sweep(est, srcvalid, targets, nnf, cost, ty, tx, half, params.search_decay, it % 2 == 0, state)
        history.append(float(cost[targets].sum()))
    return _field(est, nnf, cost, targets, history)


def inpaint(img, mask, params: InpaintParams | None = None) -> np.ndarray:
    """Fill ``mask``-ed pixels of ``img``; pixels outside the mask are returned unchanged.

    Levels (and, at full resolution, the whole PatchMatch stage) for which no
    hole-free source patch exists are skipped; the onion-peel fill then stands.
    """
    params = params or InpaintParams()
    img, mask = _check_inputs(img, mask)
    if not mask.any():
        return img.copy()
    levels = params.pyramid_levels or auto_levels(*mask.shape)
    pyr = build_pyramid(img, mask, levels)
    patch, half = params.patch_size, params.patch_size // 2
    weights = _gaussian_weights(patch)

    geo = [_level_geometry(hole, patch) for _, hole in pyr]
    usable = [lv for lv in range(levels) if geo[lv][0].any()]
    if not usable:
        return _onion_peel(img, mask)
    start = max(usable)

    est = None
    nnf = None
    for lv in range(start, -1, -1):
        lvl_img, hole = pyr[lv]
        srcvalid, targets, ty, tx = geo[lv]
        src = np.argwhere(srcvalid)
        rng = Xorshift64Star(derive_seed(params.rng_seed, lv))
        if nnf is None:
            est = _onion_peel(lvl_img, hole)
            nnf = _random_nnf(hole.shape, ty, tx, src, rng)
        else:
            nnf = _upsample_nnf(nnf, hole.shape, ty, tx, srcvalid, src, rng)
            est = _vote(lvl_img, hole, nnf, weights, half)
        cost = np.full(hole.shape, np.inf)
        state = rng.state_array()
        for _ in range(params.iterations_per_level):
            _score(est, nnf, cost, ty, tx, half)
            _sweep(est, srcvalid, targets, nnf, cost, ty, tx, half, params.search_decay, True, state)
            _sweep(est, srcvalid, targets, nnf, cost, ty, tx, half, params.search_decay, False, state)
            est = _vote(lvl_img, hole, nnf, weights, half)
    out = img.copy()
    out[mask] = est[mask]
    return out


class PatchMatchInpainter(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``transform(image, mask)`` returns the filled image."""

    def __init__(self, patch_size=7, pyramid_levels=None, iterations_per_level=5,
                 search_decay=0.5, rng_seed=0):
        self.patch_size = patch_size
        self.pyramid_levels = pyramid_levels
        self.iterations_per_level = iterations_per_level
        self.search_decay = search_decay
        self.rng_seed = rng_seed

    def fit(self, X=None, y=None):
        self.params_ = InpaintParams(self.patch_size, self.pyramid_levels,
                                     self.iterations_per_level, self.search_decay, self.rng_seed)
        return self

    def transform(self, X, mask):
        if not hasattr(self, "params_"):
            self.fit()
        return inpaint(X, mask, self.params_)

    def fit_transform(self, X, mask, **fit_params):
        return self.fit().transform(X, mask)
