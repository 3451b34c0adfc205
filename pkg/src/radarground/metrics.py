"""Rotated-box geometry, AP/AOS computation, and stratified evaluation reports.

Boxes match when their BEV (or 3D) IoU reaches the per-class threshold;
matching is greedy in descending score with each ground-truth box usable
once. AP uses 40-point interpolated precision by default (11-point
available); AOS runs the same sweep with each true positive contributing
(1 + cos(yaw error)) / 2 instead of 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidInput, ValidationError
from .scene import (
    DEFAULT_DEPTH_EDGES,
    Box3D,
    ObjectClass,
    ReferringSample,
    RegionSpec,
    depth_bucket,
    filter_boxes_by_region,
)

# VoD-style per-class matching thresholds.
DEFAULT_IOU_THRESHOLDS = {
    ObjectClass.Car: 0.5,
    ObjectClass.Pedestrian: 0.25,
    ObjectClass.Cyclist: 0.25,
}


# ---------------------------------------------------------------------------
# Rotated-rectangle geometry
# ---------------------------------------------------------------------------

def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area of a simple polygon given as (n, 2) vertices."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of `subject` against convex CCW polygon `clip`."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inputs = output
        output = []
        prev = inputs[-1]
        prev_in = ex * (prev[1] - ay) - ey * (prev[0] - ax) >= 0.0
        for cur in inputs:
            cur_in = ex * (cur[1] - ay) - ey * (cur[0] - ax) >= 0.0
            if cur_in != prev_in:
                # Edge crossing: intersect segment prev->cur with the clip line.
                dx, dy = cur[0] - prev[0], cur[1] - prev[1]
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ey * (prev[0] - ax) - ex * (prev[1] - ay)) / denom
                    output.append((prev[0] + t * dx, prev[1] + t * dy))
            if cur_in:
                output.append(cur)
            prev, prev_in = cur, cur_in
    return np.array(output) if output else np.zeros((0, 2))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    return polygon_area(clip_polygon(a.bev_corners(), b.bev_corners()))


def rotated_iou_bev(a: Box3D, b: Box3D) -> float:
    """IoU of the two yaw-rotated BEV rectangles; degenerate boxes give 0."""
    area_a = a.l * a.w
    area_b = b.l * b.w
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    inter = bev_intersection_area(a, b)
    union = area_a + area_b - inter
    return inter / union if union > 0.0 else 0.0


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU: BEV intersection times vertical overlap over union."""
    vol_a = a.l * a.w * a.h
    vol_b = b.l * b.w * b.h
    if vol_a <= 0.0 or vol_b <= 0.0:
        return 0.0
    z_olap = min(a.z + a.h / 2, b.z + b.h / 2) - max(a.z - a.h / 2, b.z - b.h / 2)
    if z_olap <= 0.0:
        return 0.0
    inter = bev_intersection_area(a, b) * z_olap
    union = vol_a + vol_b - inter
    return inter / union if union > 0.0 else 0.0


def monte_carlo_iou_bev(a: Box3D, b: Box3D, n_samples: int = 1_000_000,
                        rng: Optional[np.random.Generator] = None) -> float:
    """Sampling estimate of the BEV IoU, independent of the clipping path.

    Samples uniformly over the intersection of the two axis-aligned bounding
    boxes, estimates the intersection area, and derives the union from the
    exact rectangle areas.
    """
    rng = rng or np.random.default_rng(0)
    ca, cb = a.bev_corners(), b.bev_corners()
    lo = np.maximum(ca.min(axis=0), cb.min(axis=0))
    hi = np.minimum(ca.max(axis=0), cb.max(axis=0))
    area_a, area_b = a.l * a.w, b.l * b.w
    if area_a <= 0.0 or area_b <= 0.0 or np.any(hi <= lo):
        return 0.0
    pts = rng.uniform(lo, hi, size=(n_samples, 2))

    def inside(box: Box3D) -> np.ndarray:
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        dx = pts[:, 0] - box.x
        dy = pts[:, 1] - box.y
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (np.abs(u) <= box.l / 2) & (np.abs(v) <= box.w / 2)

    frac = np.count_nonzero(inside(a) & inside(b)) / n_samples
    inter = frac * float(np.prod(hi - lo))
    union = area_a + area_b - inter
    return inter / union if union > 0.0 else 0.0


def nms_bev_rotated(boxes: Sequence[Box3D], scores: np.ndarray, iou_threshold: float) -> list[int]:
    """Greedy rotated-BEV NMS; returns kept indices in descending-score order."""
    order = np.lexsort((np.arange(len(boxes)), -np.asarray(scores, dtype=np.float64)))
    kept: list[int] = []
    for i in order:
        if all(rotated_iou_bev(boxes[i], boxes[j]) <= iou_threshold for j in kept):
            kept.append(int(i))
    return kept


# ---------------------------------------------------------------------------
# AP / AOS
# ---------------------------------------------------------------------------

def match_sample(pred_boxes: Sequence[Box3D], pred_scores: np.ndarray,
                 gt_boxes: Sequence[Box3D], iou_threshold: float,
                 mode: str = "bev") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Greedy per-sample matching in descending score order.

    Returns (is_tp, orientation_similarity, scores), all aligned with the
    descending-score ordering of the predictions (ties broken by original
    index; equal-IoU ground truths resolve to the lowest index).
    """
    iou_fn = rotated_iou_bev if mode == "bev" else iou_3d
    order = np.lexsort((np.arange(len(pred_boxes)), -np.asarray(pred_scores, dtype=np.float64)))
    is_tp = np.zeros(len(pred_boxes), dtype=bool)
    sim = np.zeros(len(pred_boxes), dtype=np.float64)
    taken = [False] * len(gt_boxes)
    for rank, i in enumerate(order):
        best_iou, best_j = -1.0, -1
        for j, gt in enumerate(gt_boxes):
            if taken[j]:
                continue
            iou = iou_fn(pred_boxes[i], gt)
            if iou >= iou_threshold and iou > max(best_iou, 0.0):
                best_iou, best_j = iou, j
        if best_j >= 0:
            taken[best_j] = True
            is_tp[rank] = True
            sim[rank] = 0.5 * (1.0 + math.cos(pred_boxes[i].yaw - gt_boxes[best_j].yaw))
    scores_sorted = np.asarray(pred_scores, dtype=np.float64)[order]
    return is_tp, sim, scores_sorted


def _interp_at_recalls(recall: np.ndarray, values: np.ndarray,
                       recall_points: np.ndarray) -> np.ndarray:
    """max over positions with recall >= r, for each sampled recall r."""
    if len(recall) == 0:
        return np.zeros_like(recall_points)
    # Suffix max: best value achievable at or beyond each position.
    suffix = np.maximum.accumulate(values[::-1])[::-1]
    idx = np.searchsorted(recall, recall_points, side="left")
    out = np.zeros_like(recall_points)
    valid = idx < len(recall)
    out[valid] = suffix[idx[valid]]
    return out


def average_precision(per_sample_preds: Sequence[tuple[Sequence[Box3D], np.ndarray]],
                      per_sample_gts: Sequence[Sequence[Box3D]],
                      iou_threshold: float, mode: str = "bev",
                      n_points: int = 40) -> tuple[Optional[float], Optional[float]]:
    """(AP, AOS) pooled over samples; (None, None) when there is no ground truth."""
    n_gt = sum(len(g) for g in per_sample_gts)
    if n_gt == 0:
        return None, None

    rows = []
    for s_idx, ((boxes, scores), gts) in enumerate(zip(per_sample_preds, per_sample_gts)):
        if len(boxes) == 0:
            continue
        is_tp, sim, scores_sorted = match_sample(boxes, scores, gts, iou_threshold, mode)
        for p_idx in range(len(boxes)):
            rows.append((scores_sorted[p_idx], s_idx, p_idx, is_tp[p_idx], sim[p_idx]))
    if not rows:
        return 0.0, 0.0

    rows.sort(key=lambda r: (-r[0], r[1], r[2]))
    tp = np.array([r[3] for r in rows], dtype=np.float64)
    sim = np.array([r[4] for r in rows], dtype=np.float64)
    ranks = np.arange(1, len(rows) + 1, dtype=np.float64)
    recall = np.cumsum(tp) / n_gt
    precision = np.cumsum(tp) / ranks
    orient = np.cumsum(sim) / ranks

    if n_points == 40:
        recall_points = (np.arange(40, dtype=np.float64) + 1.0) / 40.0
    elif n_points == 11:
        recall_points = np.linspace(0.0, 1.0, 11)
    else:
        raise InvalidInput(f"unsupported interpolation point count {n_points}")

    ap = float(np.mean(_interp_at_recalls(recall, precision, recall_points)))
    aos = float(np.mean(_interp_at_recalls(recall, orient, recall_points)))
    return ap, aos


# ---------------------------------------------------------------------------
# Dataset-level evaluation
# ---------------------------------------------------------------------------

@dataclass
class ClassResult:
    ap: Optional[float]
    aos: Optional[float]
    n_gt: int
    n_pred: int


@dataclass
class EvalReport:
    """Per-region AP/AOS plus a depth-bucketed breakdown, all in [0, 100]."""

    regions: dict[str, dict[str, ClassResult]]
    region_map: dict[str, Optional[float]]
    region_maos: dict[str, Optional[float]]
    depth_ap: dict[str, list[Optional[float]]]
    depth_counts: dict[str, list[int]]
    depth_edges: tuple[float, ...]
    mode: str
    n_points: int

    def to_json(self) -> str:
        blob = {
            "mode": self.mode,
            "interpolation_points": self.n_points,
            "regions": {
                name: {
                    "classes": {
                        cls: {"ap": r.ap, "aos": r.aos, "n_gt": r.n_gt, "n_pred": r.n_pred}
                        for cls, r in results.items()
                    },
                    "map": self.region_map[name],
                    "maos": self.region_maos[name],
                }
                for name, results in self.regions.items()
            },
            "depth": {
                "edges": list(self.depth_edges),
                "ap": self.depth_ap,
                "n_gt": self.depth_counts,
            },
        }
        return json.dumps(blob, indent=1)

    def format_table(self) -> str:
        def fmt(v):
            return f"{v:6.2f}" if v is not None else "     -"

        classes = [c.name for c in ObjectClass]
        lines = []
        header = "Region " + " ".join(f"{c:>10}" for c in classes) + f" {'mAP':>10} {'mAOS':>10}"
        lines.append(header)
        for name, results in self.regions.items():
            row = f"{name.upper():6} "
            row += " ".join(f"{fmt(results[c].ap):>10}" for c in classes)
            row += f" {fmt(self.region_map[name]):>10} {fmt(self.region_maos[name]):>10}"
            lines.append(row)
        lines.append("")
        edges = list(self.depth_edges)
        labels = [f"{int(a)}-{int(b)}" for a, b in zip(edges, edges[1:])] + [f"{int(edges[-1])}+"]
        lines.append("Depth  " + " ".join(f"{b:>8}" for b in labels))
        for cls in classes:
            lines.append(
                f"{cls[:6]:6} " + " ".join(f"{fmt(v):>8}" for v in self.depth_ap[cls])
            )
        return "\n".join(lines)


def _class_boxes(boxes: Sequence[Box3D], cls: ObjectClass) -> list[Box3D]:
    return [b for b in boxes if b.class_id == cls]


def evaluate(predictions: dict[str, tuple[Sequence[Box3D], np.ndarray]],
             samples: Sequence[ReferringSample],
             regions: Sequence[RegionSpec] = (),
             iou_thresholds: Optional[dict] = None,
             depth_edges: Sequence[float] = DEFAULT_DEPTH_EDGES,
             mode: str = "bev", n_points: int = 40) -> EvalReport:
    """Score predictions against the referred boxes of `samples`.

    `predictions` maps sample_id to (boxes, scores); every key must exist in
    the dataset. Missing sample ids in `predictions` count as empty output.
    """
    iou_thresholds = dict(DEFAULT_IOU_THRESHOLDS if iou_thresholds is None else iou_thresholds)
    if not regions:
        regions = (RegionSpec(name="eaa"), RegionSpec(name="dca"))

    ids = {s.sample_id for s in samples}
    unknown = sorted(set(predictions) - ids)
    if unknown:
        raise ValidationError(f"predictions reference unknown sample ids: {unknown}")

    def preds_for(sample: ReferringSample) -> tuple[list[Box3D], np.ndarray]:
        boxes, scores = predictions.get(sample.sample_id, ([], np.zeros(0)))
        return list(boxes), np.asarray(scores, dtype=np.float64)

    region_results: dict[str, dict[str, ClassResult]] = {}
    region_map: dict[str, Optional[float]] = {}
    region_maos: dict[str, Optional[float]] = {}
    for region in regions:
        per_class: dict[str, ClassResult] = {}
        for cls in ObjectClass:
            sp, sg = [], []
            for sample in samples:
                boxes, scores = preds_for(sample)
                keep = [i for i, b in enumerate(boxes)
                        if b.class_id == cls and region.contains(b)]
                sp.append(([boxes[i] for i in keep], scores[keep]))
                sg.append(_class_boxes(filter_boxes_by_region(sample.referred_boxes, region), cls))
            ap, aos = average_precision(sp, sg, iou_thresholds[cls], mode, n_points)
            per_class[cls.name] = ClassResult(
                ap=None if ap is None else 100.0 * ap,
                aos=None if aos is None else 100.0 * aos,
                n_gt=sum(len(g) for g in sg),
                n_pred=sum(len(p[0]) for p in sp),
            )
        defined = [r.ap for r in per_class.values() if r.ap is not None]
        defined_aos = [r.aos for r in per_class.values() if r.aos is not None]
        region_results[region.name] = per_class
        region_map[region.name] = float(np.mean(defined)) if defined else None
        region_maos[region.name] = float(np.mean(defined_aos)) if defined_aos else None

    n_buckets = len(depth_edges)
    depth_ap: dict[str, list[Optional[float]]] = {}
    depth_counts: dict[str, list[int]] = {}
    for cls in ObjectClass:
        aps, counts = [], []
        for bucket in range(n_buckets):
            sp, sg = [], []
            for sample in samples:
                boxes, scores = preds_for(sample)
                keep = [i for i, b in enumerate(boxes)
                        if b.class_id == cls and depth_bucket(b, depth_edges) == bucket]
                sp.append(([boxes[i] for i in keep], scores[keep]))
                sg.append([b for b in _class_boxes(sample.referred_boxes, cls)
                           if depth_bucket(b, depth_edges) == bucket])
            ap, _ = average_precision(sp, sg, iou_thresholds[cls], mode, n_points)
            aps.append(None if ap is None else 100.0 * ap)
            counts.append(sum(len(g) for g in sg))
        depth_ap[cls.name] = aps
        depth_counts[cls.name] = counts

    return EvalReport(
        regions=region_results,
        region_map=region_map,
        region_maos=region_maos,
        depth_ap=depth_ap,
        depth_counts=depth_counts,
        depth_edges=tuple(depth_edges),
        mode=mode,
        n_points=n_points,
    )


# ---------------------------------------------------------------------------
# Prediction dump format (one JSON record per sample, line-delimited)
# ---------------------------------------------------------------------------

def write_predictions(path, records: Iterable[tuple[str, Sequence[Box3D], np.ndarray]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for sample_id, boxes, scores in records:
            blob = {
                "sample_id": sample_id,
                "boxes": [
                    {
                        "x": b.x, "y": b.y, "z": b.z,
                        "l": b.l, "w": b.w, "h": b.h,
                        "yaw": b.yaw, "class": b.class_id.name,
                        "score": float(s),
                    }
                    for b, s in zip(boxes, scores)
                ],
            }
            fh.write(json.dumps(blob) + "\n")


def read_predictions(path) -> dict[str, tuple[list[Box3D], np.ndarray]]:
    out: dict[str, tuple[list[Box3D], np.ndarray]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            blob = json.loads(line)
            boxes = [
                Box3D(d["x"], d["y"], d["z"], d["l"], d["w"], d["h"], d["yaw"],
                      class_id=ObjectClass.from_name(d["class"]))
                for d in blob["boxes"]
            ]
            scores = np.array([d["score"] for d in blob["boxes"]], dtype=np.float64)
            out[blob["sample_id"]] = (boxes, scores)
    return out
