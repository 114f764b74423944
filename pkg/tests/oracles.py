"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import math

import numpy as np


def gabor_scalar(x, y, theta, sx=1.8, sy=2.4, lam=4.0, phi=0.0):
    xr = x * math.cos(theta) + y * math.sin(theta)
    yr = -x * math.sin(theta) + y * math.cos(theta)
    return math.exp(-0.5 * (xr * xr / (sx * sx) + yr * yr / (sy * sy))) * math.cos(2 * math.pi * xr / lam + phi)


def correlate_loops(img, kernel):
    """Direct correlation with edge replication, one pixel at a time."""
    h, w = img.shape
    r = kernel.shape[0] // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-r, r + 1):
                yy = min(max(y + dy, 0), h - 1)
                for dx in range(-r, r + 1):
                    xx = min(max(x + dx, 0), w - 1)
                    acc += kernel[dy + r, dx + r] * img[yy, xx]
            out[y, x] = acc
    return out


def dilate_sets(mask, kernel, iterations):
    """Dilation as an explicit set of (y, x) pixels."""
    h, w = mask.shape
    r = kernel // 2
    pts = {(y, x) for y, x in zip(*np.nonzero(mask))}
    for _ in range(iterations):
        grown = set()
        for y, x in pts:
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    if 0 <= y + dy < h and 0 <= x + dx < w:
                        grown.add((y + dy, x + dx))
        pts = grown
    out = np.zeros_like(mask, dtype=bool)
    for y, x in pts:
        out[y, x] = True
    return out


def patch_geometry(hole, patch):
    h, w = hole.shape
    r = patch // 2
    near = np.zeros_like(hole)
    for y, x in zip(*np.nonzero(hole)):
        near[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1] = True
    src = ~near
    src[:r] = src[h - r:] = False
    src[:, :r] = src[:, w - r:] = False
    return near, src


def exhaustive_costs(img, targets, srcvalid, patch):
    """Best per-target mean squared patch distance over every valid source."""
    h, w, _ = img.shape
    r = patch // 2
    srcs = list(zip(*np.nonzero(srcvalid)))
    best = {}
    for ty, tx in zip(*np.nonzero(targets)):
        y0, y1 = max(-r, -ty), min(r, h - 1 - ty)
        x0, x1 = max(-r, -tx), min(r, w - 1 - tx)
        t = img[ty + y0:ty + y1 + 1, tx + x0:tx + x1 + 1]
        n = t.shape[0] * t.shape[1]
        best[(ty, tx)] = min(
            float(((t - img[sy + y0:sy + y1 + 1, sx + x0:sx + x1 + 1]) ** 2).sum()) / n
            for sy, sx in srcs)
    return best


def exhaustive_fill(img, hole, patch=7, iterations=5):
    """Single-scale EM hole filling with exhaustive patch search (Gaussian voting)."""
    h, w, c = img.shape
    r = patch // 2
    targets, srcvalid = patch_geometry(hole, patch)
    inb = np.pad(np.ones((h, w)), r)
    sy, sx = np.nonzero(srcvalid)
    ty, tx = np.nonzero(targets)
    d = np.arange(-r, r + 1)
    g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2 * (patch / 3) ** 2))

    def patches(arr, ys, xs):
        return np.stack([arr[y:y + patch, x:x + patch].reshape(-1) for y, x in zip(ys, xs)])

    est = img.copy()
    # start from the mean of the known pixels
    est[hole] = img[~hole].mean(axis=0)
    for _ in range(iterations):
        pad = np.pad(est, ((r, r), (r, r), (0, 0)))
        S = patches(pad, sy, sx)
        T = patches(pad, ty, tx)
        # in-bounds weights, repeated per channel to match the (y, x, c) flattening
        Mc = np.repeat(patches(inb[:, :, None], ty, tx), c, axis=1)
        dist = (Mc * T * T).sum(1)[:, None] - 2 * (Mc * T) @ S.T + Mc @ (S * S).T
        dist /= Mc.sum(1)[:, None]
        pick = np.argmin(dist, axis=1)
        nnf = np.full((h, w, 2), -1)
        nnf[ty, tx, 0] = sy[pick]
        nnf[ty, tx, 1] = sx[pick]
        new = est.copy()
        for y, x in zip(*np.nonzero(hole)):
            acc, wsum = np.zeros(c), 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    py, px = y - dy, x - dx
                    if 0 <= py < h and 0 <= px < w and nnf[py, px, 0] >= 0:
                        wt = g[dy + r, dx + r]
                        acc += wt * img[nnf[py, px, 0] + dy, nnf[py, px, 1] + dx]
                        wsum += wt
            new[y, x] = acc / wsum
        est = new
    return est


def greedy_match_bruteforce(oks_matrix):
    """Repeatedly take the globally largest remaining OKS pair."""
    m = np.array(oks_matrix, dtype=float)
    pairs = {}
    if m.size == 0:
        return pairs
    alive = np.ones_like(m, dtype=bool)
    while alive.any():
        best, bp, bg = -1.0, -1, -1
        for p in range(m.shape[0]):
            for g in range(m.shape[1]):
                if alive[p, g] and (m[p, g] > best or (m[p, g] == best and (g, p) < (bg, bp))):
                    best, bp, bg = m[p, g], p, g
        pairs[bp] = best
        alive[bp, :] = False
        alive[:, bg] = False
    return pairs


def ap_oracle(scores, tps, n_gt, oks=None):
    """AP as the mean over ground truths of the best precision at or beyond each hit.

    Predictions are ranked by score, then by matched OKS.
    """
    oks = [0.0] * len(scores) if oks is None else list(oks)
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], -oks[i]))
    prec, hits = [], []
    tp = 0
    for k, i in enumerate(ranked, 1):
        tp += bool(tps[i])
        prec.append(tp / k)
        hits.append(bool(tps[i]))
    return sum(max(prec[k:]) for k in range(len(ranked)) if hits[k]) / n_gt
