"""Vertex codes: polygons expressed as offsets from an object center.

Two systems: ``cartesian`` stores (dx, dy) pixel offsets per vertex, ``polar``
stores (r, theta) with r in pixels and theta in radians measured from the +x
axis toward +y (downward on screen, so increasing theta sweeps clockwise).
Coordinates live in a flat array: entry 2k is dx_k or r_k, entry 2k+1 is dy_k
or theta_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ShapeMismatch, WrongSystem
from .geometry import Point2, Polygon, RingLike, ring_array

__all__ = [
    "CARTESIAN",
    "POLAR",
    "VertexCode",
    "decode",
    "encode",
    "normalize_polar",
    "sort_by_angle",
    "angle_sort_permutation",
]

CARTESIAN = "cartesian"
POLAR = "polar"

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class VertexCode:
    """A polygon as center-relative vertex coordinates in one of two systems."""

    center: Point2
    coords: np.ndarray
    system: str

    def __post_init__(self):
        if self.system not in (CARTESIAN, POLAR):
            raise WrongSystem(f"unknown coordinate system {self.system!r}")
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 1 or c.size % 2 != 0:
            raise ShapeMismatch(f"coords must be a flat array of 2N entries, got shape {c.shape}")
        if c.size < 6:
            raise ShapeMismatch(f"need at least 3 vertices (6 entries), got {c.size}")
        if not np.isfinite(c).all():
            raise ValueError("coords must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n_vertices(self) -> int:
        return self.coords.size // 2

    def pairs(self) -> np.ndarray:
        """The coordinates as an (n, 2) view: rows (dx, dy) or (r, theta)."""
        return self.coords.reshape(-1, 2)


def decode(code: VertexCode) -> Polygon:
    """Decode a vertex code to absolute image coordinates, order preserved."""
    p = code.pairs()
    cx, cy = code.center.x, code.center.y
    if code.system == CARTESIAN:
        xy = p + np.array([cx, cy])
    else:
        r = p[:, 0]
        th = p[:, 1]
        xy = np.stack([cx + r * np.cos(th), cy + r * np.sin(th)], axis=1)
    return Polygon(xy)


def encode(p: RingLike, center: Point2, system: str) -> VertexCode:
    """Express a polygon relative to ``center``; inverse of decode within 1e-9.

    Polar angles come out normalized to [0, 2pi); a vertex sitting exactly on
    the center encodes as (r=0, theta=0).
    """
    xy = ring_array(p)
    d = xy - np.array([center.x, center.y])
    if system == CARTESIAN:
        return VertexCode(center, d.reshape(-1), CARTESIAN)
    if system != POLAR:
        raise WrongSystem(f"unknown coordinate system {system!r}")
    r = np.hypot(d[:, 0], d[:, 1])
    th = np.where(r > 0.0, np.arctan2(d[:, 1], d[:, 0]) % TWO_PI, 0.0)
    return VertexCode(center, np.stack([r, th], axis=1).reshape(-1), POLAR)


def normalize_polar(code: VertexCode) -> VertexCode:
    """Canonical polar form: r >= 0, theta in [0, 2pi), theta = 0 where r = 0."""
    if code.system != POLAR:
        raise WrongSystem("normalize_polar expects a polar code")
    p = code.pairs().copy()
    neg = p[:, 0] < 0.0
    p[neg, 0] = -p[neg, 0]
    p[neg, 1] += math.pi
    p[:, 1] %= TWO_PI
    p[p[:, 0] == 0.0, 1] = 0.0
    return VertexCode(code.center, p.reshape(-1), POLAR)


def _angles_radii(code: VertexCode) -> Tuple[np.ndarray, np.ndarray]:
    p = code.pairs()
    if code.system == POLAR:
        norm = normalize_polar(code).pairs()
        return norm[:, 1], norm[:, 0]
    r = np.hypot(p[:, 0], p[:, 1])
    th = np.where(r > 0.0, np.arctan2(p[:, 1], p[:, 0]) % TWO_PI, 0.0)
    return th, r


def angle_sort_permutation(code: VertexCode) -> np.ndarray:
    """Vertex order sorted by ascending angle about the center, ties by radius.

    Returns ``perm`` with ``perm[i]`` = original index of the vertex placed at
    position i.  Gradient code uses this to map derivatives computed in sorted
    layout back to the caller's layout.
    """
    th, r = _angles_radii(code)
    return np.lexsort((r, th))


def sort_by_angle(code: VertexCode) -> VertexCode:
    """Reorder vertices clockwise on screen (ascending angle about the center).

    The result decodes to a simple polygon whenever the center lies strictly
    inside the decoded hull (star-shaped construction); otherwise the vertices
    are still angle-ordered and the operation terminates normally.
    """
    perm = angle_sort_permutation(code)
    base = normalize_polar(code) if code.system == POLAR else code
    p = base.pairs()[perm]
    return VertexCode(code.center, p.reshape(-1), code.system)
