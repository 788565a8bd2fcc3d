"""Detection and segmentation metrics: IoU matching, AP/mAP, curves, FLOPs.

Average precision follows the standard object-detection recipe: detections
sorted by descending score, greedy single-use matching against ground truth
at an IoU threshold, precision envelope, 101-point interpolation over the
recall grid. mAP50 averages per-class AP at IoU 0.5; mAP50-95 averages the
class means over IoU thresholds 0.50..0.95 in steps of 0.05.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

IOU_GRID = [t / 100.0 for t in range(50, 100, 5)]  # 0.50 .. 0.95
CONF_GRID = [t / 100.0 for t in range(0, 101)]     # 0.00 .. 1.00 step 0.01


class DegenerateBoxError(ValueError):
    pass


class Detection(NamedTuple):
    image_id: str
    x: float
    y: float
    w: float
    h: float
    score: float
    class_id: int

    @property
    def xywh(self):
        return (self.x, self.y, self.w, self.h)


class GroundTruth(NamedTuple):
    image_id: str
    x: float
    y: float
    w: float
    h: float
    class_id: int

    @property
    def xywh(self):
        return (self.x, self.y, self.w, self.h)


def iou(a, b) -> float:
    """Intersection-over-union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a[:4]
    bx, by, bw, bh = b[:4]
    if aw <= 0 or ah <= 0 or bw <= 0 or bh <= 0:
        raise DegenerateBoxError(f"iou: non-positive box dims {a[:4]} / {b[:4]}")
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (aw * ah + bw * bh - inter)


def match_detections(dets: Sequence, gts: Sequence, iou_thr: float):
    """Greedy matching of one image's same-class detections to ground truth.

    Detections are processed by descending score (ties keep insertion
    order); each claims the unmatched GT with the highest IoU >= iou_thr.
    Returns (order, tp, unmatched_gt): `order` are input indices in the
    processed order, `tp` the aligned true-positive flags.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    tp = np.zeros(len(dets), dtype=bool)
    used = [False] * len(gts)
    for rank, i in enumerate(order):
        best_iou = 0.0
        best_j = -1
        # first max wins IoU ties: only strict improvement replaces best_j
        for j, g in enumerate(gts):
            if used[j]:
                continue
            v = iou(dets[i].xywh, g.xywh)
            if v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0 and best_iou >= iou_thr:
            used[best_j] = True
            tp[rank] = True
    return order, tp, used.count(False)


def _flags_by_score(dets: Sequence, gts: Sequence, iou_thr: float):
    """Pool per-image matches into one global (score, index, tp) ordering."""
    by_image: dict[str, list[int]] = {}
    for i, d in enumerate(dets):
        by_image.setdefault(d.image_id, []).append(i)
    gts_by_image: dict[str, list] = {}
    for g in gts:
        gts_by_image.setdefault(g.image_id, []).append(g)
    tp_by_index = {}
    for image_id, idxs in by_image.items():
        img_dets = [dets[i] for i in idxs]
        order, tp, _ = match_detections(img_dets, gts_by_image.get(image_id, []), iou_thr)
        for rank, local_i in enumerate(order):
            tp_by_index[idxs[local_i]] = bool(tp[rank])
    global_order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    return np.array([tp_by_index[i] for i in global_order], dtype=bool)


def average_precision(dets: Sequence, gts: Sequence, iou_thr: float) -> float | None:
    """101-point interpolated AP for one class (any number of images).

    Returns 0.0 with detections but no ground truth, and None (skip) when
    both are empty; skipped classes are excluded from mAP means.
    """
    if not gts:
        return None if not dets else 0.0
    if not dets:
        return 0.0
    tp = _flags_by_score(dets, gts, iou_thr)
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(~tp)
    recall = tp_cum / len(gts)
    precision = tp_cum / (tp_cum + fp_cum)
    # precision envelope: at each point, the best precision at >= that recall
    env = np.maximum.accumulate(precision[::-1])[::-1]
    grid = np.linspace(0.0, 1.0, 101)
    idx = np.searchsorted(recall, grid, side="left")
    interp = np.where(idx < len(env), env[np.minimum(idx, len(env) - 1)], 0.0)
    return float(interp.mean())


def _group_by_class(dets: Sequence, gts: Sequence):
    classes = sorted({d.class_id for d in dets} | {g.class_id for g in gts})
    for c in classes:
        yield c, [d for d in dets if d.class_id == c], [g for g in gts if g.class_id == c]


def per_class_ap(dets: Sequence, gts: Sequence, iou_thr: float) -> dict[int, float]:
    """AP per class id; classes with neither dets nor gts are omitted."""
    out = {}
    for c, dc, gc in _group_by_class(dets, gts):
        ap = average_precision(dc, gc, iou_thr)
        if ap is not None:
            out[c] = ap
    return out


def _class_mean(values: dict[int, float]) -> float:
    if not values:
        raise ValueError("mAP: no class has ground truth or detections")
    return float(np.mean(list(values.values())))


def map50(dets: Sequence, gts: Sequence) -> float:
    return _class_mean(per_class_ap(dets, gts, 0.5))


def map50_95(dets: Sequence, gts: Sequence) -> float:
    return float(np.mean([_class_mean(per_class_ap(dets, gts, t)) for t in IOU_GRID]))


# ---------------------------------------------------------------------------
# confidence-sweep curves
# ---------------------------------------------------------------------------


@dataclass
class CurveSet:
    """Precision/recall/F1 against an ascending confidence-threshold grid."""

    thresholds: list[float]
    precision: list[float]
    recall: list[float]
    f1: list[float]

    @property
    def pr_pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.recall, self.precision))


def counts_at(dets: Sequence, gts: Sequence, score_thr: float, iou_thr: float = 0.5):
    """(TP, FP, FN) pooled over images and classes at one confidence threshold."""
    kept = [d for d in dets if d.score >= score_thr]
    tp = 0
    groups: dict[tuple[str, int], list] = {}
    for d in kept:
        groups.setdefault((d.image_id, d.class_id), []).append(d)
    gt_groups: dict[tuple[str, int], list] = {}
    for g in gts:
        gt_groups.setdefault((g.image_id, g.class_id), []).append(g)
    for key, group in groups.items():
        _, flags, _ = match_detections(group, gt_groups.get(key, []), iou_thr)
        tp += int(flags.sum())
    fp = len(kept) - tp
    fn = len(gts) - tp
    return tp, fp, fn


def curves(dets: Sequence, gts: Sequence, iou_thr: float = 0.5, thresholds=None) -> CurveSet:
    """Sweep confidence thresholds; P is 1.0 when nothing passes (0 FP)."""
    ts = list(CONF_GRID) if thresholds is None else list(thresholds)
    precision, recall, f1 = [], [], []
    n_gt = len(gts)
    for t in ts:
        tp, fp, fn = counts_at(dets, gts, t, iou_thr)
        p = tp / (tp + fp) if tp + fp > 0 else 1.0
        r = tp / n_gt if n_gt > 0 else 1.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
    return CurveSet(thresholds=ts, precision=precision, recall=recall, f1=f1)


# ---------------------------------------------------------------------------
# segmentation
# ---------------------------------------------------------------------------


def mask_iou(pred: np.ndarray, gt: np.ndarray, bin_thr: float = 0.5) -> float:
    """IoU of the thresholded probability mask against a binary mask."""
    if pred.shape != gt.shape:
        raise ValueError(f"mask_iou: shape mismatch {pred.shape} vs {gt.shape}")
    pb = pred >= bin_thr
    gb = gt.astype(bool)
    union = np.logical_or(pb, gb).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pb, gb).sum() / union)


# ---------------------------------------------------------------------------
# FLOPs
# ---------------------------------------------------------------------------


def layer_flops(layer: dict) -> int:
    """Operation count for one layer-plan entry (multiply-add counted as 2)."""
    kind = layer["kind"]
    if kind == "conv":
        co, ho, wo = layer["out"]
        n = 2 * layer["k"] * layer["k"] * layer["cin"] * co * ho * wo
        if layer.get("bias", True):
            n += co * ho * wo
        return n
    if kind == "conv_transpose":
        ci, hi, wi = layer["in"]
        return 2 * layer["k"] * layer["k"] * ci * layer["cout"] * hi * wi
    if kind == "linear":
        return 2 * layer["fin"] * layer["fout"] + layer["fout"]
    if kind in ("maxpool", "upsample", "sigmoid", "leaky_relu"):
        out = layer["out"]
        n = 1
        for d in out:
            n *= d
        return n
    if kind == "flatten":
        return 0
    raise ValueError(f"layer_flops: unknown layer kind {kind!r}")


def flops_table(plan: list[dict]):
    """(total, rows) where each row is the plan entry plus its FLOPs count."""
    rows = []
    total = 0
    for layer in plan:
        n = layer_flops(layer)
        rows.append({**layer, "flops": n})
        total += n
    return total, rows
