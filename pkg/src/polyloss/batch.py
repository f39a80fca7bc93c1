"""Batch entry point for the combined polygon loss.

The request mirrors a C-style buffer layout (flat arrays plus fence-post
offsets) so a training loop can hand over a whole batch in one call.  Results
come back in a status-carrying struct instead of exceptions: callers embedding
this behind an FFI boundary must never see the host process abort.

Element i is computed by the exact same code path as a single poly_loss call,
so batch results are bit-identical to one-at-a-time evaluation and the order
of elements never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .codes import CARTESIAN, POLAR, VertexCode, encode
from .errors import PolyLossError
from .geometry import Point2, Polygon
from .losses import LossConfig, poly_loss

__all__ = ["BatchRequest", "BatchResult", "batch_poly_loss",
           "OK", "BAD_REQUEST", "ELEMENT_FAILED"]

OK = 0
BAD_REQUEST = 2
ELEMENT_FAILED = 3


@dataclass
class BatchRequest:
    """A batch of prediction/ground-truth pairs in flat buffers.

    ``pred_coords`` holds count x 2N entries, ``centers`` count x 2, and
    ground-truth ring i occupies vertex slots gt_offsets[i]:gt_offsets[i+1]
    of ``gt_vertices`` (an (M, 2) stack of all rings back to back).
    """

    count: int
    n_vertices: int
    pred_coords: np.ndarray
    centers: np.ndarray
    gt_vertices: np.ndarray
    gt_offsets: np.ndarray
    system: str = CARTESIAN
    use_l1: bool = True
    use_iou: bool = True
    use_order: bool = False
    policy: str = "paper"

    def __post_init__(self):
        self.pred_coords = np.ascontiguousarray(self.pred_coords, dtype=np.float64)
        self.centers = np.ascontiguousarray(self.centers, dtype=np.float64)
        self.gt_vertices = np.ascontiguousarray(self.gt_vertices, dtype=np.float64)
        self.gt_offsets = np.ascontiguousarray(self.gt_offsets, dtype=np.int64)


@dataclass
class BatchResult:
    """Status plus per-element outputs; losses/grads are empty on failure."""

    status: int
    message: str = ""
    losses: np.ndarray = field(default_factory=lambda: np.empty(0))
    grads: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    @property
    def ok(self) -> bool:
        return self.status == OK


def _validate(req: BatchRequest) -> Optional[str]:
    if req.count < 0:
        return f"count must be >= 0, got {req.count}"
    if req.n_vertices < 3:
        return f"n_vertices must be >= 3, got {req.n_vertices}"
    if req.system not in (CARTESIAN, POLAR):
        return f"unknown coordinate system {req.system!r}"
    if req.policy not in ("paper", "strict"):
        return f"unknown intersection policy {req.policy!r}"
    want = req.count * 2 * req.n_vertices
    if req.pred_coords.ndim != 1 or req.pred_coords.size != want:
        return (f"pred_coords must hold {want} entries "
                f"(count*2*n_vertices), got {req.pred_coords.size}")
    if req.centers.ndim != 1 or req.centers.size != 2 * req.count:
        return f"centers must hold {2 * req.count} entries, got {req.centers.size}"
    if req.gt_offsets.ndim != 1 or req.gt_offsets.size != req.count + 1:
        return (f"gt_offsets must hold count+1 = {req.count + 1} entries, "
                f"got {req.gt_offsets.size}")
    if req.gt_vertices.ndim != 2 or req.gt_vertices.shape[1] != 2:
        return f"gt_vertices must be an (M, 2) array, got shape {req.gt_vertices.shape}"
    if req.count > 0:
        if req.gt_offsets[0] != 0:
            return f"gt_offsets must start at 0, got {req.gt_offsets[0]}"
        if (np.diff(req.gt_offsets) < 3).any():
            return "every ground-truth ring needs at least 3 vertices"
        if req.use_l1 and (np.diff(req.gt_offsets) != req.n_vertices).any():
            return ("the L1 term matches coordinates one-to-one: ground-truth "
                    f"rings must hold n_vertices = {req.n_vertices} vertices")
    if req.gt_offsets.size and req.gt_offsets[-1] != req.gt_vertices.shape[0]:
        return (f"gt_offsets end at {req.gt_offsets[-1]} but gt_vertices "
                f"holds {req.gt_vertices.shape[0]} vertices")
    return None


def batch_poly_loss(req: BatchRequest) -> BatchResult:
    """poly_loss over every element of the request; never raises.

    Inconsistent buffers return status 2 with no output.  A domain failure
    on any element (degenerate ring, unresolved topology, ...) returns
    status 3 naming the element, again with no partial output.
    """
    try:
        problem = _validate(req)
        if problem is not None:
            return BatchResult(BAD_REQUEST, problem)
        cfg = LossConfig(use_l1=req.use_l1, use_iou=req.use_iou,
                         use_order=req.use_order, intersection_policy=req.policy)
        width = 2 * req.n_vertices
        losses = np.empty(req.count)
        grads = np.empty((req.count, width))
        for i in range(req.count):
            center = Point2(float(req.centers[2 * i]), float(req.centers[2 * i + 1]))
            code = VertexCode(center, req.pred_coords[i * width:(i + 1) * width],
                              req.system)
            ring = req.gt_vertices[req.gt_offsets[i]:req.gt_offsets[i + 1]]
            try:
                gt = Polygon(ring)
                gt_code = encode(gt, center, req.system) if req.use_l1 else None
                rep = poly_loss(code, gt, gt_code, cfg)
            except PolyLossError as e:
                return BatchResult(ELEMENT_FAILED,
                                   f"element {i}: {type(e).__name__}: {e}")
            losses[i] = rep.total
            grads[i] = rep.grad
        return BatchResult(OK, "", losses, grads)
    except Exception as e:  # FFI hosts must never see an unwind
        return BatchResult(BAD_REQUEST, f"{type(e).__name__}: {e}")
