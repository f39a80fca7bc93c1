"""Exact planar primitives: points, polygon rings, areas, intersections.

Coordinate convention (stated once, inherited by every other module): image
coordinates, x to the right and y DOWNWARD.  "Clockwise" always means
clockwise on screen, and the shoelace signed area

    A = 1/2 * sum(x_i * y_{i+1} - x_{i+1} * y_i)

is positive for clockwise rings under this convention.

Tolerances are scale-relative: with ``d`` the bounding-box diagonal of a ring,
coincident vertices merge below ``eps_merge(d) = 1e-7 * (1 + d)`` and
on-boundary classification uses ``eps_edge(d) = 1e-9 * (1 + d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DegeneratePolygon

__all__ = [
    "Point2",
    "Polygon",
    "Segment",
    "signed_area",
    "area",
    "segment_intersection",
    "contains_point",
    "is_simple",
    "eps_merge",
    "eps_edge",
    "perturbation_direction",
]


def eps_merge(diameter: float) -> float:
    """Coincident-vertex tolerance for a ring of the given diameter."""
    return 1e-7 * (1.0 + diameter)


def eps_edge(diameter: float) -> float:
    """On-boundary classification tolerance for a ring of the given diameter."""
    return 1e-9 * (1.0 + diameter)


@dataclass(frozen=True)
class Point2:
    """A point in image coordinates (x rightward, y downward), in pixels."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


PointLike = Union[Point2, Tuple[float, float], Sequence[float]]
RingLike = Union["Polygon", np.ndarray, Iterable[PointLike]]


def _as_xy(p: PointLike) -> Tuple[float, float]:
    if isinstance(p, Point2):
        return p.x, p.y
    x, y = float(p[0]), float(p[1])
    return x, y


def ring_array(ring: RingLike) -> np.ndarray:
    """Coerce a polygon-like object to an (n, 2) float64 vertex array."""
    if isinstance(ring, Polygon):
        return ring.xy
    a = np.asarray(ring, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) vertex array, got shape {a.shape}")
    return a


class Polygon:
    """An ordered vertex ring (closed implicitly: last vertex connects to first).

    Vertices are stored as an immutable (n, 2) float64 array in image
    coordinates.  Construction checks only structural validity (n >= 3, all
    finite); orientation and simplicity are properties of the data, computed
    on demand.  ``simple`` is an optional tag set by code that has actually
    verified (or refuted) simplicity.
    """

    __slots__ = ("xy", "simple")

    def __init__(self, vertices: RingLike, simple: Optional[bool] = None):
        xy = np.array(ring_array(vertices), dtype=np.float64)
        if xy.shape[0] < 3:
            raise DegeneratePolygon(f"polygon needs >= 3 vertices, got {xy.shape[0]}")
        if not np.isfinite(xy).all():
            raise ValueError("polygon vertices must be finite")
        xy.setflags(write=False)
        self.xy = xy
        self.simple = simple

    @classmethod
    def cleaned(cls, vertices: RingLike) -> "Polygon":
        """Build a polygon after merging consecutive near-duplicate vertices.

        Raises DegeneratePolygon when fewer than 3 distinct vertices survive or
        the ring area falls below ``eps_merge(diameter)**2``.
        """
        xy = ring_array(vertices)
        if xy.shape[0] == 0:
            raise DegeneratePolygon("empty vertex list")
        d = _bbox_diagonal(xy)
        tol = eps_merge(d)
        kept = [xy[0]]
        for v in xy[1:]:
            if math.hypot(v[0] - kept[-1][0], v[1] - kept[-1][1]) > tol:
                kept.append(v)
        # the ring is closed: drop a trailing duplicate of the first vertex
        while len(kept) > 1 and math.hypot(kept[-1][0] - kept[0][0], kept[-1][1] - kept[0][1]) <= tol:
            kept.pop()
        if len(kept) < 3:
            raise DegeneratePolygon("fewer than 3 distinct vertices after merging")
        p = cls(np.asarray(kept))
        if p.area() < tol * tol:
            raise DegeneratePolygon(f"near-zero ring area {p.area():g}")
        return p

    def __len__(self) -> int:
        return self.xy.shape[0]

    def __repr__(self) -> str:
        return f"Polygon({self.xy.tolist()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Polygon) and self.xy.shape == other.xy.shape and bool(
            (self.xy == other.xy).all()
        )

    @property
    def vertices(self) -> Tuple[Point2, ...]:
        return tuple(Point2(float(x), float(y)) for x, y in self.xy)

    def diameter(self) -> float:
        return _bbox_diagonal(self.xy)

    def signed_area(self) -> float:
        return signed_area(self)

    def area(self) -> float:
        return area(self)

    def reversed(self) -> "Polygon":
        return Polygon(self.xy[::-1], simple=self.simple)

    def clockwise(self) -> "Polygon":
        """Return a copy oriented clockwise on screen (positive signed area)."""
        return self if signed_area(self) >= 0.0 else self.reversed()

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(self.xy + np.array([dx, dy]), simple=self.simple)

    def scaled(self, s: float, about: PointLike = (0.0, 0.0)) -> "Polygon":
        cx, cy = _as_xy(about)
        c = np.array([cx, cy])
        return Polygon((self.xy - c) * s + c, simple=self.simple)

    def centroid(self) -> Point2:
        m = self.xy.mean(axis=0)
        return Point2(float(m[0]), float(m[1]))


@dataclass(frozen=True)
class Segment:
    """A directed line segment with distinct endpoints."""

    a: Point2
    b: Point2

    def __post_init__(self):
        scale = 1.0 + max(abs(self.a.x), abs(self.a.y), abs(self.b.x), abs(self.b.y))
        if math.hypot(self.b.x - self.a.x, self.b.y - self.a.y) <= 1e-7 * scale:
            raise ValueError("segment endpoints coincide")


def _bbox_diagonal(xy: np.ndarray) -> float:
    mins = xy.min(axis=0)
    maxs = xy.max(axis=0)
    return float(math.hypot(maxs[0] - mins[0], maxs[1] - mins[1]))


def signed_area(p: RingLike) -> float:
    """Shoelace signed area; positive for clockwise rings in image coordinates."""
    xy = ring_array(p)
    n = xy.shape[0]
    if n < 3:
        raise DegeneratePolygon(f"signed_area needs >= 3 vertices, got {n}")
    x = xy[:, 0]
    y = xy[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def area(p: RingLike) -> float:
    """Absolute shoelace area of a ring, in pixels squared."""
    return abs(signed_area(p))


def segment_intersection(
    s1: Segment, s2: Segment
) -> Optional[Tuple[Point2, float, float]]:
    """Intersect two segments via their parametric forms.

    Returns ``(point, t1, t2)`` with ``t1, t2`` in [0, 1] when the segments
    meet in a single point, or ``None`` for parallel, collinear, or disjoint
    pairs.  Degenerate contacts between polygon rings are not resolved here;
    the clipping module applies its perturbation policy before re-running.
    """
    ax, ay = s1.a.x, s1.a.y
    rx, ry = s1.b.x - ax, s1.b.y - ay
    cx, cy = s2.a.x, s2.a.y
    ex, ey = s2.b.x - cx, s2.b.y - cy
    denom = rx * ey - ry * ex
    scale = abs(rx * ey) + abs(ry * ex)
    if abs(denom) <= 1e-14 * (1.0 + scale):
        return None
    qx, qy = cx - ax, cy - ay
    t1 = (qx * ey - qy * ex) / denom
    t2 = (qx * ry - qy * rx) / denom
    if -0.0 <= t1 <= 1.0 and 0.0 <= t2 <= 1.0 and t1 >= 0.0:
        return Point2(ax + t1 * rx, ay + t1 * ry), t1, t2
    return None


def _boundary_distance(xy: np.ndarray, qx: float, qy: float) -> float:
    """Distance from a point to the closest edge of a ring."""
    a = xy
    b = np.roll(xy, -1, axis=0)
    d = b - a
    w = np.array([qx, qy]) - a
    seg_len2 = np.maximum((d * d).sum(axis=1), 1e-300)
    t = np.clip((w * d).sum(axis=1) / seg_len2, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist = np.hypot(proj[:, 0] - qx, proj[:, 1] - qy)
    return float(dist.min())


def _parity_inside(xy: np.ndarray, qx: float, qy: float) -> bool:
    # ray-crossing parity toward +x
    x = xy[:, 0]
    y = xy[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    crosses = (y > qy) != (yn > qy)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = x + (qy - y) * (xn - x) / (yn - y)
    hit = crosses & (xs > qx)
    return bool(hit.sum() % 2 == 1)


def perturbation_direction(index: int) -> Tuple[float, float]:
    """Deterministic unit jitter direction for vertex ``index``.

    Derived from a fixed hash so degenerate-contact handling is reproducible
    across runs and implementations.
    """
    h = math.sin((index + 1) * 12.9898) * 43758.5453
    frac = h - math.floor(h)
    ang = 2.0 * math.pi * frac
    return math.cos(ang), math.sin(ang)


def perturbed_ring(xy: np.ndarray, delta: float) -> np.ndarray:
    """Pull each vertex toward the ring centroid with an index-seeded jitter.

    The centroid-ward bias makes a ring perturbed against an identical copy
    resolve to containment rather than a swarm of ill-conditioned crossings;
    the jitter breaks residual symmetry.  Magnitude ``delta`` is absolute.
    """
    c = xy.mean(axis=0)
    out = np.empty_like(xy)
    for k in range(xy.shape[0]):
        vx = c[0] - xy[k, 0]
        vy = c[1] - xy[k, 1]
        norm = math.hypot(vx, vy)
        if norm < 1e-300:
            vx, vy = perturbation_direction(k)
        else:
            vx /= norm
            vy /= norm
        jx, jy = perturbation_direction(k)
        # small tangential jitter: rotate the centroid-ward direction a bit
        ang = 0.2 * (jx)  # jx in [-1, 1] -> rotation in [-0.2, 0.2] rad
        ca, sa = math.cos(ang), math.sin(ang)
        dx = ca * vx - sa * vy
        dy = sa * vx + ca * vy
        out[k, 0] = xy[k, 0] + delta * dx
        out[k, 1] = xy[k, 1] + delta * dy
    return out


def contains_point(p: RingLike, q: PointLike) -> bool:
    """Ray-crossing parity test for point-in-polygon.

    Points within ``eps_edge`` of the boundary are classified by perturbing
    the query point deterministically (escalating magnitude, 3 attempts) and
    re-testing, mirroring the clipping perturbation policy.
    """
    xy = ring_array(p)
    if xy.shape[0] < 3:
        raise DegeneratePolygon("contains_point needs a ring with >= 3 vertices")
    qx, qy = _as_xy(q)
    d = _bbox_diagonal(xy)
    edge_tol = eps_edge(d)
    if _boundary_distance(xy, qx, qy) > edge_tol:
        return _parity_inside(xy, qx, qy)
    delta = 1e-9 * max(d, 1.0)
    for attempt in range(3):
        ux, uy = perturbation_direction(attempt)
        px, py = qx + delta * ux, qy + delta * uy
        if _boundary_distance(xy, px, py) > edge_tol:
            return _parity_inside(xy, px, py)
        delta *= 10.0
    # still glued to the boundary: fall back to raw parity
    return _parity_inside(xy, qx, qy)


def _proper_cross(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    """True when segments ab and cd share at least one point (inclusive)."""
    rx, ry = bx - ax, by - ay
    ex, ey = dx - cx, dy - cy
    denom = rx * ey - ry * ex
    qx, qy = cx - ax, cy - ay
    if denom == 0.0:
        # parallel: intersect only if collinear and overlapping in range
        if qx * ry - qy * rx != 0.0:
            return False
        # project onto the longer axis of ab
        if abs(rx) >= abs(ry):
            t0, t1 = sorted(((cx - ax) / rx, (dx - ax) / rx)) if rx != 0.0 else (0.0, 0.0)
        else:
            t0, t1 = sorted(((cy - ay) / ry, (dy - ay) / ry)) if ry != 0.0 else (0.0, 0.0)
        return t1 >= 0.0 and t0 <= 1.0
    t = (qx * ey - qy * ex) / denom
    u = (qx * ry - qy * rx) / denom
    return 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0


def is_simple(p: RingLike) -> bool:
    """True when no pair of non-adjacent edges intersects (O(n^2) test)."""
    xy = ring_array(p)
    n = xy.shape[0]
    if n < 3:
        raise DegeneratePolygon("is_simple needs >= 3 vertices")
    for i in range(n):
        ax, ay = xy[i]
        bx, by = xy[(i + 1) % n]
        if ax == bx and ay == by:
            continue  # zero-length edge cannot create a crossing
        for j in range(i + 1, n):
            # skip the edge itself and the two adjacent edges
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            cx, cy = xy[j]
            dx, dy = xy[(j + 1) % n]
            if cx == dx and cy == dy:
                continue
            if _proper_cross(ax, ay, bx, by, cx, cy, dx, dy):
                return False
    return True
