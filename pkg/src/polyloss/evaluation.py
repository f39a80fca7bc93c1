"""Evaluation harness: rasterization oracle, mask IoU, COCO-style AP, the
oracle-detection protocol, and the loss-kernel latency benchmark.

AP follows the MSCOCO protocol: per category and IoU threshold, predictions
ranked by score are greedily matched one-to-one to ground truth, the
precision-recall curve is integrated at 101 recall points, and the headline
number averages thresholds 0.50:0.05:0.95.  Instance overlap is measured on
rasterized masks at image resolution, matching how polygon submissions are
scored, while polygon clipping stays the loss-side tool.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .codes import CARTESIAN, VertexCode, decode
from .errors import DegeneratePolygon, FormatError, MissingCenter, ShapeMismatch
from .geometry import Point2, Polygon, RingLike, ring_array
from . import kernel

__all__ = [
    "DEFAULT_THRESHOLDS",
    "InstanceRecord",
    "EvalResult",
    "BenchReport",
    "rasterize",
    "mask_iou",
    "average_precision",
    "oracle_eval",
    "bench",
    "instance_doc",
    "read_instance_file",
    "write_instance_file",
]

DEFAULT_THRESHOLDS = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))

RECALL_LEVELS = np.linspace(0.0, 1.0, 101)


@dataclass
class InstanceRecord:
    """One object instance in an image, either predicted or ground truth."""

    image_id: str
    category: str
    score: float
    center: Point2
    polygon: Polygon
    depth: Optional[float] = None

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass
class EvalResult:
    """AP table: per category, per threshold, and the headline means."""

    per_category_ap: Dict[str, float]
    ap: float
    ap50: float
    per_threshold: Dict[float, float]
    empty_categories: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "per_category_ap": dict(sorted(self.per_category_ap.items())),
            "per_threshold": {f"{t:.2f}": v for t, v in sorted(self.per_threshold.items())},
            "empty_categories": sorted(self.empty_categories),
        }

    def to_table(self) -> str:
        """Aligned plain-text rendering of the AP table."""
        rows = [("category", "AP", "AP50")]
        for cat in sorted(self.per_category_ap):
            flag = " (no predictions)" if cat in self.empty_categories else ""
            rows.append((cat + flag, f"{self.per_category_ap[cat]:.4f}", ""))
        rows.append(("mean", f"{self.ap:.4f}", f"{self.ap50:.4f}"))
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        lines = [f"{r[0]:<{w0}}  {r[1]:>{w1}}  {r[2]}".rstrip() for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        thr = "  ".join(f"{t:.2f}:{v:.3f}" for t, v in sorted(self.per_threshold.items()))
        lines.append("per-threshold AP  " + thr)
        return "\n".join(lines)


def rasterize(p: RingLike, width: int, height: int) -> np.ndarray:
    """Scanline even-odd fill; a pixel is set when its center lies inside.

    Returns a boolean (height, width) grid.
    """
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
    xy = ring_array(p)
    if xy.shape[0] < 3:
        raise DegeneratePolygon(f"ring has {xy.shape[0]} vertices")
    x1 = xy[:, 0]
    y1 = xy[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    yc = np.arange(height, dtype=np.float64) + 0.5
    crosses = (y1[:, None] > yc[None, :]) != (y2[:, None] > yc[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (x2 - x1) / (y2 - y1)
        xint = x1[:, None] + (yc[None, :] - y1[:, None]) * slope[:, None]
    xint = np.where(crosses, xint, np.inf)
    xs = np.sort(xint, axis=0)
    m = xs.shape[0] // 2
    if m == 0:
        return np.zeros((height, width), dtype=bool)
    starts = xs[0:2 * m:2, :].T
    ends = xs[1:2 * m:2, :].T
    valid = np.isfinite(ends)
    rows = np.nonzero(valid)[0]
    # half-open pixel-center windows: first center >= start, last center < end
    c0 = np.clip(np.ceil(starts[valid] - 0.5), 0, width).astype(np.int64)
    c1 = np.clip(np.ceil(ends[valid] - 0.5), 0, width).astype(np.int64)
    diff = np.zeros((height, width + 1), dtype=np.int8)
    np.add.at(diff, (rows, c0), 1)
    np.add.at(diff, (rows, c1), -1)
    return np.cumsum(diff[:, :width], axis=1, dtype=np.int8) > 0


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Pixel IoU of two binary grids; two empty grids count as identical."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"grid shapes differ: {a.shape} vs {b.shape}")
    a = a != 0
    b = b != 0
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return inter / union


def _inferred_size(records: Iterable[InstanceRecord]) -> Tuple[int, int]:
    w = h = 1.0
    for r in records:
        w = max(w, float(r.polygon.xy[:, 0].max()))
        h = max(h, float(r.polygon.xy[:, 1].max()))
    return int(math.ceil(w)) + 1, int(math.ceil(h)) + 1


def _interp_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """101-point interpolated AP from a cumulative PR sequence."""
    if recall.size == 0:
        return 0.0
    # precision envelope: max precision at recall >= r
    env = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_LEVELS, side="left")
    vals = np.where(idx < recall.size, env[np.minimum(idx, recall.size - 1)], 0.0)
    return float(vals.mean())


def average_precision(preds: Sequence[InstanceRecord], gts: Sequence[InstanceRecord],
                      thresholds: Optional[Sequence[float]] = None,
                      image_sizes: Optional[Mapping[str, Tuple[int, int]]] = None) -> EvalResult:
    """MSCOCO-style AP over rasterized masks.

    ``image_sizes`` maps image_id to (width, height); sizes for unlisted
    images are inferred from polygon extents.  Score ties are broken by input
    order, so results are deterministic for a given argument order.
    """
    thresholds = tuple(thresholds) if thresholds is not None else DEFAULT_THRESHOLDS
    categories = sorted({g.category for g in gts})
    sizes: Dict[str, Tuple[int, int]] = dict(image_sizes) if image_sizes else {}
    by_image: Dict[str, Tuple[List[Tuple[int, InstanceRecord]], List[Tuple[int, InstanceRecord]]]] = {}
    for i, r in enumerate(preds):
        by_image.setdefault(r.image_id, ([], []))[0].append((i, r))
    for i, r in enumerate(gts):
        by_image.setdefault(r.image_id, ([], []))[1].append((i, r))
    for image_id, (ip, ig) in by_image.items():
        if image_id not in sizes:
            sizes[image_id] = _inferred_size([r for _, r in ip + ig])

    # IoU of every same-image same-category (pred, gt) pair, keyed by indices
    iou: Dict[Tuple[int, int], float] = {}
    for image_id, (ip, ig) in by_image.items():
        if not ip or not ig:
            continue
        w, h = sizes[image_id]
        masks_p = {i: rasterize(r.polygon, w, h) for i, r in ip}
        masks_g = {j: rasterize(r.polygon, w, h) for j, r in ig}
        for i, rp in ip:
            for j, rg in ig:
                if rp.category == rg.category:
                    iou[(i, j)] = mask_iou(masks_p[i], masks_g[j])

    per_cat: Dict[str, float] = {}
    per_cat_thr: Dict[str, Dict[float, float]] = {}
    empty: List[str] = []
    for cat in categories:
        cat_preds = [(i, r) for i, r in enumerate(preds) if r.category == cat]
        cat_preds.sort(key=lambda e: (-e[1].score, e[0]))
        cat_gts = [(j, r) for j, r in enumerate(gts) if r.category == cat]
        n_gt = len(cat_gts)
        if not cat_preds:
            empty.append(cat)
            per_cat[cat] = 0.0
            per_cat_thr[cat] = {t: 0.0 for t in thresholds}
            continue
        gt_of_image: Dict[str, List[int]] = {}
        for j, r in cat_gts:
            gt_of_image.setdefault(r.image_id, []).append(j)
        ap_per_thr: Dict[float, float] = {}
        for t in thresholds:
            matched: set = set()
            tp = np.zeros(len(cat_preds))
            for k, (i, rp) in enumerate(cat_preds):
                best_j = -1
                best = 0.0
                for j in gt_of_image.get(rp.image_id, ()):
                    if j in matched:
                        continue
                    v = iou.get((i, j), 0.0)
                    if v > best:
                        best = v
                        best_j = j
                if best_j >= 0 and best >= t:
                    matched.add(best_j)
                    tp[k] = 1.0
            tp_cum = np.cumsum(tp)
            fp_cum = np.cumsum(1.0 - tp)
            recall = tp_cum / n_gt
            precision = tp_cum / np.maximum(tp_cum + fp_cum, 1e-300)
            ap_per_thr[t] = _interp_ap(recall, precision)
        per_cat_thr[cat] = ap_per_thr
        per_cat[cat] = float(np.mean(list(ap_per_thr.values())))

    if categories:
        ap = float(np.mean([per_cat[c] for c in categories]))
        per_threshold = {t: float(np.mean([per_cat_thr[c][t] for c in categories]))
                         for t in thresholds}
        ap50 = per_threshold.get(0.50, next(iter(per_threshold.values())))
    else:
        ap = 0.0
        ap50 = 0.0
        per_threshold = {t: 0.0 for t in thresholds}
    return EvalResult(per_cat, ap, ap50, per_threshold, empty)


def oracle_eval(gts: Sequence[InstanceRecord],
                polygon_field: Mapping[Tuple[float, float], VertexCode],
                thresholds: Optional[Sequence[float]] = None,
                image_sizes: Optional[Mapping[str, Tuple[int, int]]] = None) -> EvalResult:
    """Score polygon quality under perfect detection.

    One prediction is synthesized per ground truth, at the GT center with
    score 1.0, using the vertex code looked up by center coordinates; this
    isolates the polygon head from detection quality.
    """
    preds = []
    for g in gts:
        key = (g.center.x, g.center.y)
        code = polygon_field.get(key)
        if code is None:
            raise MissingCenter(f"no polygon code for center {key} (image {g.image_id})")
        preds.append(InstanceRecord(g.image_id, g.category, 1.0, g.center, decode(code)))
    return average_precision(preds, gts, thresholds, image_sizes)


@dataclass
class BenchReport:
    """Latency of the compiled IoU value+gradient path, single-threaded."""

    pair_count: int
    n_vertices: int
    median_us: float
    p99_us: float
    loss_checksum: float
    losses_head: List[float]

    def as_dict(self) -> dict:
        return {
            "pair_count": self.pair_count,
            "n_vertices": self.n_vertices,
            "median_us": self.median_us,
            "p99_us": self.p99_us,
            "loss_checksum": self.loss_checksum,
            "losses_head": self.losses_head,
        }


def _star_ring(rng: np.random.Generator, n: int, cx: float, cy: float, radius: float):
    sector = 2.0 * math.pi / n
    lo, hi = (0.3, 0.7) if n == 3 else (0.1, 0.9)
    th = (np.arange(n) + rng.uniform(lo, hi, n)) * sector
    r = radius * rng.uniform(0.5, 1.0, n)
    return cx + r * np.cos(th), cy + r * np.sin(th)


def _bench_pair(rng: np.random.Generator, n: int):
    gx, gy = _star_ring(rng, n, 50.0, 50.0, 20.0)
    gt = Polygon(np.column_stack([gx, gy]), simple=True)
    shift = rng.uniform(0.0, 2.5)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    pcx = 50.0 + shift * math.cos(ang)
    pcy = 50.0 + shift * math.sin(ang)
    px, py = _star_ring(rng, n, pcx, pcy, 20.0 * rng.uniform(0.7, 1.3))
    coords = np.empty(2 * n)
    coords[0::2] = px - pcx
    coords[1::2] = py - pcy
    code = VertexCode(Point2(pcx, pcy), coords, CARTESIAN)
    return kernel.prepare_pair(code, gt)


def bench(pair_count: int, n_vertices: int, seed: int = 0) -> BenchReport:
    """Median and p99 latency of one IoU loss value+gradient evaluation.

    Pairs are random overlapping star rings; each pair is prepared up front
    and timed individually around the compiled kernel call, so the numbers
    measure the loss computation itself.  Loss values are deterministic for a
    fixed seed; wall-clock numbers naturally are not.
    """
    if pair_count < 1:
        raise ValueError(f"pair_count must be positive, got {pair_count}")
    if n_vertices < 3:
        raise ValueError(f"n_vertices must be >= 3, got {n_vertices}")
    kernel.warmup()
    rng = np.random.default_rng(seed)
    preps = []
    while len(preps) < pair_count:
        try:
            prep = _bench_pair(rng, n_vertices)
            kernel.kernel_call(prep, False)
        except Exception:
            continue
        preps.append(prep)
    grad = np.empty(2 * n_vertices)
    losses = np.empty(pair_count)
    ts = np.empty(pair_count)
    for i, prep in enumerate(preps):
        t0 = time.perf_counter_ns()
        loss, _ = kernel.kernel_call(prep, False, grad)
        t1 = time.perf_counter_ns()
        losses[i] = loss
        ts[i] = t1 - t0
    return BenchReport(
        pair_count=pair_count,
        n_vertices=n_vertices,
        median_us=float(np.median(ts)) / 1e3,
        p99_us=float(np.percentile(ts, 99)) / 1e3,
        loss_checksum=float(losses.sum()),
        losses_head=[float(v) for v in losses[:8]],
    )


def _record_from_json(obj: dict, image_id: str, path: str, index: int) -> InstanceRecord:
    try:
        category = str(obj["category"])
        score = float(obj["score"])
        cx, cy = (float(v) for v in obj["center"])
        verts = [(float(p[0]), float(p[1])) for p in obj["vertices"]]
        depth = float(obj["depth"]) if obj.get("depth") is not None else None
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise FormatError(f"{path}: instance {index} of image {image_id!r}: {e}")
    try:
        return InstanceRecord(image_id, category, score, Point2(cx, cy),
                              Polygon(np.asarray(verts)), depth)
    except Exception as e:
        raise FormatError(f"{path}: instance {index} of image {image_id!r}: {e}")


def read_instance_file(path: str):
    """Parse an instance JSON file.

    Layout: a list of per-image objects {"image_id", "width", "height",
    "instances": [{"category", "score", "center", "vertices", "depth"?}]}.
    Returns (records, image_sizes).
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"bad JSON in {path}: {e.msg}", offset=e.pos)
    if not isinstance(doc, list):
        raise FormatError(f"{path}: expected a top-level list of image objects")
    records: List[InstanceRecord] = []
    sizes: Dict[str, Tuple[int, int]] = {}
    for img in doc:
        if not isinstance(img, dict) or "image_id" not in img:
            raise FormatError(f"{path}: image entries need an image_id")
        image_id = str(img["image_id"])
        if "width" in img and "height" in img:
            sizes[image_id] = (int(img["width"]), int(img["height"]))
        insts = img.get("instances", [])
        if not isinstance(insts, list):
            raise FormatError(f"{path}: image {image_id!r} instances must be a list")
        for k, obj in enumerate(insts):
            records.append(_record_from_json(obj, image_id, path, k))
    return records, sizes


def instance_doc(records: Sequence[InstanceRecord],
                 image_sizes: Optional[Mapping[str, Tuple[int, int]]] = None) -> list:
    """Records regrouped into the per-image JSON layout, input order kept."""
    order: List[str] = []
    grouped: Dict[str, List[InstanceRecord]] = {}
    for r in records:
        if r.image_id not in grouped:
            order.append(r.image_id)
        grouped.setdefault(r.image_id, []).append(r)
    doc = []
    for image_id in order:
        entry: dict = {"image_id": image_id}
        if image_sizes and image_id in image_sizes:
            w, h = image_sizes[image_id]
            entry["width"] = int(w)
            entry["height"] = int(h)
        entry["instances"] = [
            {
                "category": r.category,
                "score": r.score,
                "center": [r.center.x, r.center.y],
                "vertices": [[float(x), float(y)] for x, y in r.polygon.xy],
                **({"depth": r.depth} if r.depth is not None else {}),
            }
            for r in grouped[image_id]
        ]
        doc.append(entry)
    return doc


def write_instance_file(path: str, records: Sequence[InstanceRecord],
                        image_sizes: Optional[Mapping[str, Tuple[int, int]]] = None) -> None:
    """Inverse of read_instance_file; output is stable for stable inputs."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_doc(records, image_sizes), fh, sort_keys=True, indent=1)
        fh.write("\n")
