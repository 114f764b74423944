"""Keypoint and mask evaluation metrics.

Per-instance metrics (MED, RMSE, NME, PCK, AUC, OKS) consider only keypoints
whose ground-truth visibility is > 0 (0 absent, 1 occluded, 2 visible).
Dataset-level evaluation matches predictions to ground truth per frame,
greedily by descending OKS, and reports one row per group.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_mask, check_map, check_same_size
from .exceptions import InvalidArgumentError, SchemaError, UndefinedMetricError

NORMALIZERS = ("bbox_diagonal", "bbox_max_side")


def _coco_grid():
    return [round(0.5 + 0.05 * i, 2) for i in range(10)]


@dataclass(frozen=True)
class MetricConfig:
    pck_thresholds: tuple = (0.05, 0.10)
    auc_range: tuple = (0.0, 0.10)
    auc_samples: int = 101
    oks_sigmas: object = 0.05  # scalar or one value per keypoint
    map_oks_thresholds: tuple = field(default_factory=lambda: tuple(_coco_grid()))
    nme_normalizer: str = "bbox_diagonal"

    def __post_init__(self):
        for name in ("pck_thresholds", "map_oks_thresholds"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals or any(v <= 0 for v in vals) or list(vals) != sorted(vals):
                raise InvalidArgumentError(f"{name} must be positive and sorted ascending")
            object.__setattr__(self, name, vals)
        lo, hi = (float(v) for v in self.auc_range)
        if not 0 <= lo < hi:
            raise InvalidArgumentError("auc_range must satisfy 0 <= low < high")
        object.__setattr__(self, "auc_range", (lo, hi))
        if self.auc_samples < 2:
            raise InvalidArgumentError("auc_samples must be >= 2")
        if self.nme_normalizer not in NORMALIZERS:
            raise InvalidArgumentError(f"nme_normalizer must be one of {NORMALIZERS}")
        sig = np.atleast_1d(np.asarray(self.oks_sigmas, dtype=np.float64))
        if np.any(sig <= 0):
            raise InvalidArgumentError("oks_sigmas must be > 0")

    def sigmas(self, n_keypoints: int) -> np.ndarray:
        sig = np.atleast_1d(np.asarray(self.oks_sigmas, dtype=np.float64))
        if sig.size == 1:
            return np.full(n_keypoints, sig[0])
        if sig.size != n_keypoints:
            raise InvalidArgumentError(f"{sig.size} OKS sigmas for {n_keypoints} keypoints")
        return sig

    def to_dict(self) -> dict:
        d = asdict(self)
        d["oks_sigmas"] = np.asarray(self.oks_sigmas).tolist()
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class Instance:
    keypoints: np.ndarray          # (K, 3): x, y, visibility
    bbox: tuple                    # (x, y, w, h)
    instance_id: object = None
    frame_id: object = None
    score: float | None = None

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=np.float64)
        if kp.ndim != 2 or kp.shape[1] != 3:
            raise InvalidArgumentError(f"keypoints must be (K, 3), got {kp.shape}")
        self.keypoints = kp
        self.bbox = tuple(float(b) for b in self.bbox)
        if len(self.bbox) != 4:
            raise InvalidArgumentError("bbox must be (x, y, w, h)")

    @property
    def visible(self) -> np.ndarray:
        return self.keypoints[:, 2] > 0


def _check_bbox(inst: Instance):
    w, h = inst.bbox[2], inst.bbox[3]
    if not (w > 0 and h > 0 and math.isfinite(w) and math.isfinite(h)):
        raise InvalidArgumentError(f"degenerate bbox {inst.bbox}")
    return w, h


def keypoint_distances(pred: Instance, gt: Instance) -> np.ndarray:
    """Euclidean errors at the ground-truth-visible keypoints."""
    if pred.keypoints.shape[0] != gt.keypoints.shape[0]:
        raise InvalidArgumentError("pred and gt have different keypoint counts")
    vis = gt.visible
    if not vis.any():
        raise UndefinedMetricError("ground truth has no visible keypoints")
    diff = pred.keypoints[vis, :2] - gt.keypoints[vis, :2]
    return np.hypot(diff[:, 0], diff[:, 1])


def med(pred: Instance, gt: Instance) -> float:
    return float(keypoint_distances(pred, gt).mean())


def rmse(pred: Instance, gt: Instance) -> float:
    d = keypoint_distances(pred, gt)
    return float(np.sqrt(np.mean(d * d)))


def _normalizer(gt: Instance, kind: str) -> float:
    w, h = _check_bbox(gt)
    return math.hypot(w, h) if kind == "bbox_diagonal" else max(w, h)


def nme(pred: Instance, gt: Instance, config: MetricConfig | None = None) -> float:
    config = config or MetricConfig()
    return 100.0 * med(pred, gt) / _normalizer(gt, config.nme_normalizer)


def _pck_from(d: np.ndarray, ref: np.ndarray, t: float) -> float:
    return 100.0 * float(np.mean(d <= t * ref))


def pck(pred: Instance, gt: Instance, t: float) -> float:
    """Percent of visible keypoints within ``t * max(bbox_w, bbox_h)``."""
    d = keypoint_distances(pred, gt)
    return _pck_from(d, np.full(d.shape, max(_check_bbox(gt))), t)


def _auc_from(d: np.ndarray, ref: np.ndarray, config: MetricConfig) -> float:
    lo, hi = config.auc_range
    ts = np.linspace(lo, hi, config.auc_samples)
    curve = np.array([_pck_from(d, ref, t) for t in ts])
    return float(np.trapezoid(curve, ts) / (hi - lo))


def auc(pred: Instance, gt: Instance, config: MetricConfig | None = None) -> float:
    """Trapezoidal mean of PCK(t) over ``auc_range``, on a 0-100 scale."""
    config = config or MetricConfig()
    d = keypoint_distances(pred, gt)
    return _auc_from(d, np.full(d.shape, max(_check_bbox(gt))), config)


def oks(pred: Instance, gt: Instance, config: MetricConfig | None = None) -> float:
    config = config or MetricConfig()
    d = keypoint_distances(pred, gt)
    w, h = _check_bbox(gt)
    k = config.sigmas(gt.keypoints.shape[0])[gt.visible]
    s2 = w * h
    return float(np.mean(np.exp(-(d * d) / (2.0 * s2 * k * k))))


def bce_with_logits(logits, target) -> float:
    """Mean binary cross-entropy of ``sigmoid(logits)`` against a binary mask."""
    x = check_map(logits, name="logits")
    y = check_mask(target).astype(np.float64)
    check_same_size(x, y, ("logits", "target"))
    return float(np.mean(np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))))


def mask_iou(pred, gt) -> float:
    pred, gt = check_mask(pred), check_mask(gt)
    check_same_size(pred, gt, ("pred", "gt"))
    union = np.count_nonzero(pred | gt)
    return 1.0 if union == 0 else np.count_nonzero(pred & gt) / union


def psnr(a, b, region=None, peak: float = 1.0) -> float:
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    diff = a - b
    if region is not None:
        diff = diff[check_mask(region)]
    mse = float(np.mean(diff * diff)) if diff.size else 0.0
    return math.inf if mse == 0 else 10.0 * math.log10(peak * peak / mse)


# -- datasets ----------------------------------------------------------------

def _evaluable(gt: Instance) -> bool:
    return bool(gt.visible.any())


def match_frame(preds, gts, config: MetricConfig | None = None):
    """Greedy one-to-one matching by descending OKS; returns ``[(pi, gi, oks)]``.

    Ground truths without visible keypoints never match. Ties go to the
    lower ground-truth index, then the lower prediction index.
    """
    config = config or MetricConfig()
    pairs = []
    for gi, g in enumerate(gts):
        if not _evaluable(g):
            continue
        for pi, p in enumerate(preds):
            pairs.append((-oks(p, g, config), gi, pi))
    pairs.sort()
    used_p, used_g, out = set(), set(), []
    for neg, gi, pi in pairs:
        if gi in used_g or pi in used_p:
            continue
        used_g.add(gi)
        used_p.add(pi)
        out.append((pi, gi, -neg))
    return out


def average_precision(scores, is_tp, n_gt: int, tiebreak=None) -> float:
    """All-point interpolated AP over predictions ranked by descending score.

    ``tiebreak`` (higher first) orders predictions that share a score; without
    it ties keep their input order.
    """
    if n_gt <= 0:
        raise UndefinedMetricError("no ground-truth instances")
    scores = np.asarray(scores, dtype=np.float64)
    is_tp = np.asarray(is_tp, dtype=bool)
    if scores.size == 0:
        return 0.0
    second = np.zeros_like(scores) if tiebreak is None else np.asarray(tiebreak, dtype=np.float64)
    order = np.lexsort((-second, -scores))
    tp = is_tp[order]
    ctp = np.cumsum(tp).astype(np.float64)
    precision = ctp / np.arange(1, tp.size + 1)
    recall = ctp / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.r_[0.0, recall])
    return float(np.sum(steps * envelope))


def _frames_union(preds: dict, gts: dict):
    return sorted(set(preds) | set(gts), key=lambda f: (str(type(f)), f))


def map_oks(preds: dict, gts: dict, config: MetricConfig | None = None) -> float:
    """Mean over OKS thresholds of detection AP.

    ``preds`` and ``gts`` map frame id -> list of :class:`Instance`. Missing
    scores count as 1.0; equal scores are ranked by matched OKS, so with no
    scores at all AP equals recall.
    """
    config = config or MetricConfig()
    n_gt = sum(_evaluable(g) for frame in gts.values() for g in frame)
    if n_gt == 0:
        raise UndefinedMetricError("empty ground-truth set")
    scores, matched = [], []
    for f in _frames_union(preds, gts):
        ps, gs = preds.get(f, []), gts.get(f, [])
        by_pred = {pi: o for pi, _, o in match_frame(ps, gs, config)}
        for pi, p in enumerate(ps):
            scores.append(1.0 if p.score is None else float(p.score))
            matched.append(by_pred.get(pi, -1.0))
    matched = np.asarray(matched)
    aps = [average_precision(scores, matched >= tau, n_gt, tiebreak=matched)
           for tau in config.map_oks_thresholds]
    return float(np.mean(aps))


def _pooled_row(pairs, config: MetricConfig) -> dict:
    row = dict.fromkeys(["MED", "RMSE", "NME", "AUC", "OKS"], None)
    for t in config.pck_thresholds:
        row[_pck_name(t)] = None
    if not pairs:
        return row
    d_all, ref_all, nmes, okss = [], [], [], []
    for p, g in pairs:
        d = keypoint_distances(p, g)
        d_all.append(d)
        ref_all.append(np.full(d.shape, max(_check_bbox(g))))
        nmes.append(nme(p, g, config))
        okss.append(oks(p, g, config))
    d, ref = np.concatenate(d_all), np.concatenate(ref_all)
    row["MED"] = float(d.mean())
    row["RMSE"] = float(np.sqrt(np.mean(d * d)))
    row["NME"] = float(np.mean(nmes))
    for t in config.pck_thresholds:
        row[_pck_name(t)] = _pck_from(d, ref, t)
    row["AUC"] = _auc_from(d, ref, config)
    row["OKS"] = float(np.mean(okss))
    return row


def _pck_name(t: float) -> str:
    return f"PCK@{t:.2f}"


def evaluate(preds: dict, gts: dict, config: MetricConfig | None = None, groups: dict | None = None):
    """Metric table: one row per group (``groups`` maps frame id -> key) plus ``all``."""
    config = config or MetricConfig()
    groups = groups or {}
    frames = _frames_union(preds, gts)
    keys = ["all"] + sorted({str(groups[f]) for f in frames if f in groups})
    rows = []
    for key in keys:
        sel = [f for f in frames if key == "all" or str(groups.get(f)) == key]
        pairs, n_pred, n_gt = [], 0, 0
        for f in sel:
            ps, gs = preds.get(f, []), gts.get(f, [])
            n_pred += len(ps)
            n_gt += sum(_evaluable(g) for g in gs)
            pairs += [(ps[pi], gs[gi]) for pi, gi, _ in match_frame(ps, gs, config)]
        row = {"group": key, "n_gt": n_gt, "n_pred": n_pred, "n_matched": len(pairs)}
        row.update(_pooled_row(pairs, config))
        sub_p = {f: preds.get(f, []) for f in sel}
        sub_g = {f: gts.get(f, []) for f in sel}
        row["mAP@OKS"] = map_oks(sub_p, sub_g, config) if n_gt else None
        rows.append(row)
    return rows


# -- keypoint files ----------------------------------------------------------

def parse_keypoint_json(data, source="<json>", n_keypoints: int | None = None):
    """Parse ``{frames: [{frame_id, instances: [...]}]}``.

    Returns ``(frames, groups)``: frame id -> instances, and frame id -> group
    key for frames that carry ``group``, ``species`` or ``sequence``.
    """
    if not isinstance(data, dict) or not isinstance(data.get("frames"), list):
        raise SchemaError(f"{source}: top level must be an object with a 'frames' list", record="frames")
    frames, groups = {}, {}
    for fi, fr in enumerate(data["frames"]):
        where = f"{source}: frames[{fi}]"
        if not isinstance(fr, dict) or "frame_id" not in fr or not isinstance(fr.get("instances"), list):
            raise SchemaError(f"{where} needs 'frame_id' and an 'instances' list", record=fr)
        fid = fr["frame_id"]
        for k in ("group", "species", "sequence"):
            if k in fr:
                groups[fid] = fr[k]
                break
        insts = []
        for ii, inst in enumerate(fr["instances"]):
            here = f"{where}.instances[{ii}]"
            try:
                kp = np.asarray(inst["keypoints"], dtype=np.float64)
                bbox = [float(b) for b in inst["bbox"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{here}: {exc!r}", record=inst) from None
            if kp.ndim != 2 or kp.shape[1] != 3 or len(bbox) != 4:
                raise SchemaError(f"{here}: keypoints must be [[x, y, v], ...] and bbox [x, y, w, h]",
                                  record=inst)
            if n_keypoints is None:
                n_keypoints = kp.shape[0]
            elif kp.shape[0] != n_keypoints:
                raise SchemaError(f"{here}: {kp.shape[0]} keypoints, expected {n_keypoints}", record=inst)
            score = inst.get("score")
            insts.append(Instance(kp, bbox, inst.get("instance_id", ii), fid,
                                  None if score is None else float(score)))
        frames.setdefault(fid, []).extend(insts)
    return frames, groups, n_keypoints


def load_keypoint_file(path, n_keypoints: int | None = None):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})", record=str(path)) from None
    return parse_keypoint_json(data, str(path), n_keypoints)


def write_table_csv(path, rows, config: MetricConfig) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in sorted(config.to_dict().items()):
            fh.write(f"# {k}={json.dumps(v)}\n")
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in r.items()})


def write_table_json(path, rows, config: MetricConfig) -> None:
    with open(path, "w") as fh:
        json.dump({"config": config.to_dict(), "rows": rows}, fh, indent=2)
        fh.write("\n")
