"""Ground-truth polygon construction from instance masks.

An N-gon is carved out of a binary mask by casting rays from the instance's
bounding box toward the box center: ray origins sit at perimeter-uniform
positions along the box (clockwise from the top-left corner), each ray marches
inward in 0.5 px steps, and the first foreground sample becomes a vertex.
Rays that cross only background (concavities, holes) emit the box center, so
the output always has exactly N vertices.

Also houses the mask file format (16-bit PGM with a JSON label sidecar) and a
reader for Cityscapes-style polygon annotation files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import EmptyMask, FormatError
from .geometry import Point2, Polygon, is_simple

__all__ = [
    "InstanceMask",
    "GtPolygonSpec",
    "ROAD_USER_CLASSES",
    "mask_to_polygon",
    "load_mask",
    "load_cityscapes_polygons",
]

# the 8 road-user classes evaluated on Cityscapes
ROAD_USER_CLASSES = (
    "person", "rider", "car", "truck", "bus", "train", "motorcycle", "bicycle",
)


@dataclass
class InstanceMask:
    """A label grid (0 = background) plus the id -> category map."""

    pixels: np.ndarray
    categories: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"mask grid must be 2-d and non-empty, got shape {px.shape}")
        self.pixels = px
        missing = [i for i in self.instance_ids() if i not in self.categories]
        if missing:
            raise FormatError(f"instance ids {missing} missing from the category map")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def instance_ids(self) -> List[int]:
        ids = np.unique(self.pixels)
        return [int(i) for i in ids if i != 0]

    def binary(self, instance_id: int) -> np.ndarray:
        """Foreground grid of one instance."""
        return self.pixels == instance_id


@dataclass(frozen=True)
class GtPolygonSpec:
    """How many vertices to cast and how ray origins are spaced."""

    n_vertices: int = 16
    sampling: str = "perimeter"

    def __post_init__(self):
        if self.n_vertices < 3:
            raise ValueError(f"need at least 3 vertices, got {self.n_vertices}")
        if self.sampling != "perimeter":
            raise ValueError(f"unknown sampling mode {self.sampling!r}")


def _perimeter_point(d: float, x0: float, y0: float, w: float, h: float):
    """Point at arc distance d along the box boundary, clockwise from top-left."""
    if d < w:
        return x0 + d, y0
    d -= w
    if d < h:
        return x0 + w, y0 + d
    d -= h
    if d < w:
        return x0 + w - d, y0 + h
    d -= w
    return x0, y0 + h - d


def mask_to_polygon(mask: np.ndarray, spec: GtPolygonSpec = GtPolygonSpec()) -> Tuple[Polygon, Point2]:
    """Ray-cast an N-gon from a single-instance binary grid.

    Returns (polygon, center) where the center is the centroid of the emitted
    vertices.  Raises EmptyMask when the grid has no foreground pixel.
    """
    grid = np.asarray(mask) != 0
    if grid.ndim != 2:
        raise ValueError(f"mask must be a 2-d grid, got shape {grid.shape}")
    ys, xs = np.nonzero(grid)
    if ys.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    px0, px1 = int(xs.min()), int(xs.max())
    py0, py1 = int(ys.min()), int(ys.max())
    # box in continuous coordinates: outer edges of the extreme pixels
    bx0, by0 = float(px0), float(py0)
    bw, bh = float(px1 - px0 + 1), float(py1 - py0 + 1)
    cx = bx0 + 0.5 * bw
    cy = by0 + 0.5 * bh
    perimeter = 2.0 * (bw + bh)
    step = perimeter / spec.n_vertices

    verts = []
    for k in range(spec.n_vertices):
        ox, oy = _perimeter_point(k * step, bx0, by0, bw, bh)
        dist = math.hypot(cx - ox, cy - oy)
        ts = np.arange(0.0, dist, 0.5)
        ts = np.append(ts, dist)
        sx = ox + ts * ((cx - ox) / dist)
        sy = oy + ts * ((cy - oy) / dist)
        # floor sampling, clamped into the box's pixel range so points on the
        # outer box edge read the boundary pixel
        ix = np.clip(np.floor(sx).astype(np.int64), px0, px1)
        iy = np.clip(np.floor(sy).astype(np.int64), py0, py1)
        hits = grid[iy, ix]
        j = int(np.argmax(hits))
        if hits[j]:
            verts.append((float(sx[j]), float(sy[j])))
        else:
            verts.append((cx, cy))
    poly = Polygon(np.asarray(verts))
    c = poly.centroid()
    return poly, c


def _read_pgm_token(buf: bytes, pos: int) -> Tuple[bytes, int]:
    """Next whitespace-delimited token, skipping '#' comment lines."""
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise FormatError("unexpected end of header", offset=pos)
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def load_mask(path: str) -> InstanceMask:
    """Read a 16-bit PGM instance-id grid plus its label sidecar.

    Format: binary PGM ("P5"), maxval 65535, big-endian samples, pixel value =
    instance id.  Categories come from ``<name>.labels.json`` next to the mask
    (optional when the grid holds no instances).
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_pgm_token(buf, 0)
    if magic != b"P5":
        raise FormatError(f"not a binary PGM (magic {magic!r})", offset=0)
    fields = []
    for _ in range(3):
        tok, pos = _read_pgm_token(buf, pos)
        if not tok.isdigit():
            raise FormatError(f"bad header token {tok!r}", offset=pos - len(tok))
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}", offset=0)
    if maxval != 65535:
        raise FormatError(f"expected maxval 65535, got {maxval}", offset=pos - len(str(maxval)))
    pos += 1  # single whitespace byte after maxval
    need = width * height * 2
    if len(buf) - pos < need:
        raise FormatError(
            f"truncated pixel data: need {need} bytes, have {len(buf) - pos}",
            offset=len(buf))
    grid = np.frombuffer(buf[pos:pos + need], dtype=">u2").reshape(height, width)
    grid = grid.astype(np.int64)

    sidecar = os.path.splitext(path)[0] + ".labels.json"
    categories: Dict[int, str] = {}
    if os.path.exists(sidecar):
        with open(sidecar, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as e:
                raise FormatError(f"bad label sidecar {sidecar}: {e.msg}", offset=e.pos)
        if not isinstance(raw, dict):
            raise FormatError(f"label sidecar {sidecar} must be an object")
        for key, value in raw.items():
            try:
                categories[int(key)] = str(value)
            except ValueError:
                raise FormatError(f"non-integer instance id {key!r} in {sidecar}")
    return InstanceMask(grid, categories)


def _dedup_ring(points: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    out = [points[0]]
    for p in points[1:]:
        if p != out[-1]:
            out.append(p)
    while len(out) > 1 and out[-1] == out[0]:
        out.pop()
    return out


def load_cityscapes_polygons(path: str) -> List[Tuple[str, Polygon]]:
    """Road-user polygons from a Cityscapes-style ``*_polygons.json`` file.

    Keeps the 8 evaluated classes (a trailing "group" suffix, as in
    "cargroup", maps to the base class).  Consecutive duplicate vertices are
    dropped; rings that self-intersect are returned tagged ``simple=False``
    rather than discarded.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"bad JSON in {path}: {e.msg}", offset=e.pos)
    objects = doc.get("objects") if isinstance(doc, dict) else None
    if not isinstance(objects, list):
        raise FormatError(f'{path}: missing top-level "objects" array')
    out: List[Tuple[str, Polygon]] = []
    for i, obj in enumerate(objects):
        if not isinstance(obj, dict) or "label" not in obj or "polygon" not in obj:
            raise FormatError(f"{path}: object {i} lacks label/polygon")
        label = str(obj["label"])
        if label.endswith("group"):
            label = label[:-len("group")]
        if label not in ROAD_USER_CLASSES:
            continue
        ring = obj["polygon"]
        try:
            pts = [(float(p[0]), float(p[1])) for p in ring]
        except (TypeError, ValueError, IndexError):
            raise FormatError(f"{path}: object {i} polygon is not a list of [x, y] pairs")
        if not pts:
            raise FormatError(f"{path}: object {i} polygon is empty")
        pts = _dedup_ring(pts)
        if len(pts) < 3:
            continue  # degenerate sliver, nothing to evaluate
        poly = Polygon(np.asarray(pts))
        poly.simple = is_simple(poly)
        out.append((label, poly))
    return out
