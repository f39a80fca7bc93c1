"""Polygon-head losses: IoU, L1 vertex regression, vertex-order penalty.

Every loss returns a LossReport holding the scalar value and the gradient in
the caller's coordinate layout.  The IoU gradient differentiates through the
clipping result with the discrete structure (crossing set, in/out pattern,
containment kind, sort permutation) frozen at the primal point: the loss is
piecewise smooth and this is the branch gradient, with 0 substituted at the
global minimum (a valid subgradient there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import autodiff
from .autodiff import Dual, grad_of
from .clipping import IntersectionResult, clip_rings
from .codes import POLAR, VertexCode, angle_sort_permutation
from .errors import ShapeMismatch, WrongSystem
from .geometry import Polygon, area, is_simple, signed_area

__all__ = ["LossConfig", "LossReport", "IouObjective", "PolyObjective",
           "iou_loss", "l1_loss", "order_loss", "poly_loss"]

TWO_PI = 2.0 * math.pi

# below this, the loss sits at its global minimum and the gradient is taken as 0
ZERO_LOSS_EPS = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Which loss terms run and how they are weighted.

    Defaults mirror the shipped configuration: Cartesian codes with L1 + IoU
    enabled, order loss off, equal weights.
    """

    use_l1: bool = True
    use_iou: bool = True
    use_order: bool = False
    intersection_policy: str = "paper"
    weight_l1: float = 1.0
    weight_iou: float = 1.0
    weight_order: float = 1.0

    def __post_init__(self):
        if not (self.use_l1 or self.use_iou or self.use_order):
            raise ValueError("at least one loss term must be enabled")
        if min(self.weight_l1, self.weight_iou, self.weight_order) < 0.0:
            raise ValueError("loss weights must be >= 0")
        if self.intersection_policy not in ("paper", "strict"):
            raise ValueError(f"unknown policy {self.intersection_policy!r}")


@dataclass
class LossReport:
    total: float
    per_term: Dict[str, float]
    grad: np.ndarray

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=np.float64)


def _subject_index_map(code: VertexCode) -> tuple:
    """Sorted, positively-oriented subject ring and its code-vertex indices.

    Returns (ring_xy, idx) where ring vertex k equals the decoded code vertex
    idx[k].  The gradient computed in ring layout maps back through idx.
    """
    from .codes import decode, sort_by_angle

    perm = angle_sort_permutation(code)
    ring = decode(code).xy[perm]
    idx = list(perm)
    if signed_area(ring) < 0.0:
        ring = ring[::-1]
        idx = idx[::-1]
    return np.ascontiguousarray(ring), idx


def _decode_vertex(xs: Sequence, code: VertexCode, v: int):
    """Absolute position of code vertex v from a scalar coordinate list."""
    cx, cy = code.center.x, code.center.y
    a, b = xs[2 * v], xs[2 * v + 1]
    if code.system == POLAR:
        return cx + a * autodiff.cos(b), cy + a * autodiff.sin(b)
    return cx + a, cy + b


def _shoelace(points: List) -> object:
    total = 0.0
    n = len(points)
    for k in range(n):
        x1, y1 = points[k]
        x2, y2 = points[(k + 1) % n]
        total = total + (x1 * y2 - x2 * y1)
    return total * 0.5


def _crossing_point(sa, sb, c, d):
    """Intersection of dual-valued subject edge sa->sb with float clip edge c->d."""
    ax, ay = sa
    bx, by = sb
    rx, ry = bx - ax, by - ay
    ex, ey = d[0] - c[0], d[1] - c[1]
    denom = rx * ey - ry * ex
    t = ((c[0] - ax) * ey - (c[1] - ay) * ex) / denom
    return ax + t * rx, ay + t * ry


class IouObjective:
    """The IoU loss as a scalar objective over one code's flat coordinates.

    Implements the freeze/dual/signature protocol of the diff engine: plain
    calls re-derive the clipping topology, dual calls replay the structure
    captured by the last freeze.
    """

    def __init__(self, template: VertexCode, gt: Polygon, policy: str = "paper"):
        if policy not in ("paper", "strict"):
            raise ValueError(f"unknown policy {policy!r}")
        if gt.simple is None:
            gt.simple = is_simple(gt)
        if not gt.simple:
            from .errors import NotSimple
            raise NotSimple("ground-truth polygon self-intersects")
        self.template = template
        self.gt_xy = gt.clockwise().xy
        self.gt_area = area(gt)
        self.policy = policy
        self._frozen = None
        self._cache_key = None
        self._cache_val = None

    def _code(self, xs) -> VertexCode:
        return VertexCode(self.template.center, np.asarray(xs, dtype=np.float64),
                          self.template.system)

    def _analyze(self, xs):
        code = self._code(xs)
        ring, idx = _subject_index_map(code)
        res = clip_rings(ring, self.gt_xy)
        return ring, idx, res

    def _loss_from(self, a_s: float, inter: float) -> float:
        union = a_s + self.gt_area - inter
        loss = 1.0 - inter / union
        return min(max(loss, 0.0), 1.0)

    def _inter_primal(self, res: IntersectionResult, a_s: float) -> float:
        if res.kind == "disjoint":
            return min(a_s, self.gt_area) if self.policy == "paper" else 0.0
        return res.area

    def _fresh(self, xs):
        key = np.asarray(xs, dtype=np.float64).tobytes()
        if key == self._cache_key:
            return self._cache_val
        ring, idx, res = self._analyze(xs)
        a_s = abs(signed_area(ring))
        loss = self._loss_from(a_s, self._inter_primal(res, a_s))
        sig = (tuple(idx), res.signature())
        self._cache_key = key
        self._cache_val = (loss, sig)
        return self._cache_val

    def __call__(self, xs) -> float:
        return self._fresh(xs)[0]

    def signature(self, xs):
        return self._fresh(xs)[1]

    def freeze(self, xs):
        ring, idx, res = self._analyze(xs)
        a_s = abs(signed_area(ring))
        inter = self._inter_primal(res, a_s)
        loss = self._loss_from(a_s, inter)
        self._frozen = {
            "idx": idx,
            "res": res,
            "at_minimum": loss <= ZERO_LOSS_EPS,
            "min_branch_subject": res.kind == "disjoint" and a_s <= self.gt_area,
        }

    def dual(self, xs):
        fr = self._frozen
        if fr is None:
            raise RuntimeError("dual called before freeze")
        if fr["at_minimum"]:
            return Dual(0.0, 0.0)
        code = self._code([x.a if isinstance(x, Dual) else x for x in xs])
        verts = [_decode_vertex(xs, code, v) for v in fr["idx"]]
        a_s = _shoelace(verts)  # positive orientation frozen by the index map
        res: IntersectionResult = fr["res"]
        if res.kind == "proper":
            inter = 0.0
            for trace in res.piece_traces:
                pts = []
                for tag, k in trace:
                    if tag == "s":
                        pts.append(verts[k])
                    elif tag == "c":
                        pts.append((self.gt_xy[k, 0], self.gt_xy[k, 1]))
                    else:
                        i, j = res.crossing_edges[k]
                        n = len(verts)
                        pts.append(_crossing_point(
                            verts[i], verts[(i + 1) % n],
                            self.gt_xy[j], self.gt_xy[(j + 1) % len(self.gt_xy)]))
                inter = inter + _shoelace(pts)
        elif res.kind == "s_inside_c":
            inter = a_s
        elif res.kind == "c_inside_s":
            inter = Dual(self.gt_area, 0.0)
        else:  # disjoint: the frozen min-area branch under paper policy, 0 under strict
            if self.policy == "paper":
                inter = a_s if fr["min_branch_subject"] else Dual(self.gt_area, 0.0)
            else:
                inter = Dual(0.0, 0.0)
        union = a_s + self.gt_area - inter
        return 1.0 - inter / union


def iou_loss(pred: VertexCode, gt: Polygon, policy: str = "paper") -> LossReport:
    """1 - intersection/union of the angle-sorted prediction against gt.

    The gradient covers the prediction coordinates only (gt held constant)
    and is returned in the caller's layout.
    """
    obj = IouObjective(pred, gt, policy)
    report = grad_of(obj, pred)
    return LossReport(report.value, {"iou": report.value}, report.grad)


def l1_loss(pred: VertexCode, gt_code: VertexCode) -> LossReport:
    """Mean absolute difference over the 2N coordinates of two codes."""
    if pred.system != gt_code.system:
        raise ShapeMismatch(
            f"codes use different systems: {pred.system} vs {gt_code.system}")
    if pred.coords.size != gt_code.coords.size:
        raise ShapeMismatch(
            f"codes differ in vertex count: {pred.n_vertices} vs {gt_code.n_vertices}")
    diff = pred.coords - gt_code.coords
    value = float(np.abs(diff).mean())
    grad = np.sign(diff) / diff.size
    return LossReport(value, {"l1": value}, grad)


def _order_terms(thetas: Sequence) -> object:
    """Inversion + spread penalty over an angle sequence, scalar-generic."""
    total = 0.0
    n = len(thetas)
    for i in range(n):
        for j in range(i):
            d = thetas[i] - thetas[j]
            if d < 0.0:
                total = total + (thetas[j] - thetas[i])
            elif d > TWO_PI:
                total = total + d
    return total


class OrderObjective:
    """Order loss as an objective; indicators compare primal values."""

    def __init__(self, template: VertexCode):
        if template.system != POLAR:
            raise WrongSystem("order loss requires polar codes")

    def __call__(self, xs):
        return _order_terms([xs[k] for k in range(1, len(xs), 2)])

    dual = __call__

    def signature(self, xs):
        th = [float(xs[k]) for k in range(1, len(xs), 2)]
        states = []
        for i in range(len(th)):
            for j in range(i):
                d = th[i] - th[j]
                states.append(0 if d < 0.0 else (2 if d > TWO_PI else 1))
        return tuple(states)


def order_loss(pred: VertexCode) -> LossReport:
    """Penalty on angle sequences that invert or spread beyond one turn.

    Inversions add the positive gap theta_j - theta_i for each earlier j with
    theta_j > theta_i; spreads add theta_i - theta_j where the gap exceeds
    2 pi.  Radii never contribute.  Indicators are strict, so exactly equal
    angles cost nothing.
    """
    obj = OrderObjective(pred)
    report = grad_of(obj, pred)
    return LossReport(report.value, {"order": report.value}, report.grad)


class L1Objective:
    def __init__(self, gt_code: VertexCode):
        self.gt = [float(v) for v in gt_code.coords]

    def __call__(self, xs):
        n = len(xs)
        total = 0.0
        for k in range(n):
            total = total + abs(xs[k] - self.gt[k])
        return total / n

    dual = __call__

    def signature(self, xs):
        return tuple(np.sign([float(xs[k]) - self.gt[k] for k in range(len(xs))]))


class PolyObjective:
    """Weighted sum of the enabled loss terms as one objective."""

    def __init__(self, template: VertexCode, gt: Polygon,
                 gt_code: Optional[VertexCode], cfg: LossConfig):
        self.parts = []
        if cfg.use_l1:
            if gt_code is None:
                raise ShapeMismatch("L1 term requires a ground-truth code")
            if gt_code.system != template.system:
                raise ShapeMismatch(
                    f"codes use different systems: {template.system} vs {gt_code.system}")
            if gt_code.coords.size != template.coords.size:
                raise ShapeMismatch(
                    f"codes differ in vertex count: {template.n_vertices} "
                    f"vs {gt_code.n_vertices}")
            self.parts.append(("l1", cfg.weight_l1, L1Objective(gt_code)))
        if cfg.use_iou:
            self.parts.append(("iou", cfg.weight_iou,
                               IouObjective(template, gt, cfg.intersection_policy)))
        if cfg.use_order:
            self.parts.append(("order", cfg.weight_order, OrderObjective(template)))

    def freeze(self, xs):
        for _, _, obj in self.parts:
            fr = getattr(obj, "freeze", None)
            if fr is not None:
                fr(xs)

    def __call__(self, xs):
        return sum(w * obj(xs) for _, w, obj in self.parts)

    def dual(self, xs):
        total = Dual(0.0, 0.0)
        for _, w, obj in self.parts:
            total = total + w * obj.dual(xs)
        return total

    def signature(self, xs):
        return tuple(obj.signature(xs) for _, _, obj in self.parts)


def poly_loss(pred: VertexCode, gt: Polygon, gt_code: Optional[VertexCode] = None,
              cfg: LossConfig = LossConfig()) -> LossReport:
    """Weighted sum of the enabled terms with gradients summed coordinate-wise."""
    per_term: Dict[str, float] = {}
    total = 0.0
    grad = np.zeros(pred.coords.size)
    if cfg.use_l1:
        if gt_code is None:
            raise ShapeMismatch("L1 term requires a ground-truth code")
        rep = l1_loss(pred, gt_code)
        per_term["l1"] = rep.per_term["l1"]
        total += cfg.weight_l1 * rep.per_term["l1"]
        grad += cfg.weight_l1 * rep.grad
    if cfg.use_iou:
        rep = iou_loss(pred, gt, cfg.intersection_policy)
        per_term["iou"] = rep.per_term["iou"]
        total += cfg.weight_iou * rep.per_term["iou"]
        grad += cfg.weight_iou * rep.grad
    if cfg.use_order:
        rep = order_loss(pred)
        per_term["order"] = rep.per_term["order"]
        total += cfg.weight_order * rep.per_term["order"]
        grad += cfg.weight_order * rep.grad
    return LossReport(total, per_term, grad)
