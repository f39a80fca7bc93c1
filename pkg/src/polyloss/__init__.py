"""Differentiable polygon losses plus the tooling around them: vertex codes,
Weiler-Atherton clipping, ray-cast ground-truth polygons, rasterization, and
a COCO-style AP harness.
"""

from .errors import (
    DegeneratePolygon,
    EmptyMask,
    FormatError,
    MissingCenter,
    NotSimple,
    PolyLossError,
    ShapeMismatch,
    TopologyUnresolved,
    WrongSystem,
)
from .geometry import Point2, Polygon, area, signed_area
from .codes import CARTESIAN, POLAR, VertexCode, decode, encode, sort_by_angle
from .clipping import intersection_area, weiler_atherton
from .losses import LossConfig, LossReport, iou_loss, l1_loss, order_loss, poly_loss
from .autodiff import finite_diff_check, grad_of
from .gt import GtPolygonSpec, InstanceMask, load_cityscapes_polygons, load_mask, mask_to_polygon
from .evaluation import (
    InstanceRecord,
    EvalResult,
    average_precision,
    bench,
    mask_iou,
    oracle_eval,
    rasterize,
    read_instance_file,
    write_instance_file,
)
from .batch import BatchRequest, BatchResult, batch_poly_loss

__version__ = "0.1.0"

__all__ = [
    "PolyLossError", "DegeneratePolygon", "NotSimple", "TopologyUnresolved",
    "ShapeMismatch", "WrongSystem", "EmptyMask", "MissingCenter", "FormatError",
    "Point2", "Polygon", "area", "signed_area",
    "CARTESIAN", "POLAR", "VertexCode", "decode", "encode", "sort_by_angle",
    "intersection_area", "weiler_atherton",
    "LossConfig", "LossReport", "iou_loss", "l1_loss", "order_loss", "poly_loss",
    "finite_diff_check", "grad_of",
    "GtPolygonSpec", "InstanceMask", "load_cityscapes_polygons", "load_mask",
    "mask_to_polygon",
    "InstanceRecord", "EvalResult", "average_precision", "bench", "mask_iou",
    "oracle_eval", "rasterize", "read_instance_file", "write_instance_file",
    "BatchRequest", "BatchResult", "batch_poly_loss",
    "__version__",
]
