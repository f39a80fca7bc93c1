"""Weiler-Atherton intersection of two simple clockwise polygon rings.

The traversal follows the classic four steps: find all proper edge crossings,
splice them into both rings with in/out labels, walk the subject ring from an
"in" crossing to the next "out" crossing, switch rings there, and keep
alternating until the start crossing recurs; repeat while unvisited "in"
crossings remain.  No crossings means containment or disjointness, settled by
point-in-polygon tests.

Degenerate contacts (shared vertices, vertex-on-edge, collinear overlapping
edges, near-tangent crossing clusters) are not resolved in place: the subject
ring is perturbed by a deterministic centroid-ward nudge of magnitude
1e-9 * diameter (escalating tenfold, at most 3 retries) and the clip is re-run.
Exactly identical rings (up to cyclic rotation) short-circuit to containment
so self-intersection stays exact.

Results carry a symbolic trace of every emitted piece (which subject vertices,
clip vertices, and crossings form its ring) so differentiation can replay the
area computation with the discrete structure frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np

from .errors import TopologyUnresolved, NotSimple
from .geometry import (
    Point2,
    Polygon,
    contains_point,
    eps_edge,
    is_simple,
    perturbed_ring,
    signed_area,
)

__all__ = ["CrossingNode", "IntersectionResult", "weiler_atherton", "intersection_area"]

Kind = Literal["proper", "s_inside_c", "c_inside_s", "disjoint"]

# trace nodes: ("s", subject vertex idx) | ("c", clip vertex idx) | ("x", crossing idx)
TraceNode = Tuple[str, int]


@dataclass(frozen=True)
class CrossingNode:
    """One proper crossing, positioned on both rings as edge index + parameter."""

    point: Point2
    label: str  # "in" when the subject edge enters the clip polygon
    pos_in_subject: float
    pos_in_clip: float


@dataclass
class IntersectionResult:
    pieces: List[Polygon]
    kind: Kind
    area: float
    crossings: List[CrossingNode] = field(default_factory=list)
    # replay data: piece rings as trace nodes; crossing k lives on subject
    # edge crossing_edges[k][0] and clip edge crossing_edges[k][1]
    piece_traces: List[List[TraceNode]] = field(default_factory=list)
    crossing_edges: List[Tuple[int, int]] = field(default_factory=list)
    perturbed: bool = False

    def signature(self) -> Tuple:
        """Hashable topology descriptor; differs whenever the branch structure does."""
        return (self.kind, len(self.pieces), tuple(sorted(self.crossing_edges)))


class _Degenerate(Exception):
    """Internal: contact case requiring the perturbation policy."""


def _rings_cyclically_equal(a: np.ndarray, b: np.ndarray) -> bool:
    if a.shape != b.shape:
        return False
    hits = np.nonzero((b == a[0]).all(axis=1))[0]
    for k in hits:
        if (np.roll(b, -int(k), axis=0) == a).all():
            return True
    return False


def _find_crossings(sxy: np.ndarray, cxy: np.ndarray, tol: float):
    """All proper crossings as dicts; raises _Degenerate on any contact case."""
    ns = sxy.shape[0]
    nc = cxy.shape[0]
    found = []
    for i in range(ns):
        ax, ay = sxy[i]
        bx, by = sxy[(i + 1) % ns]
        rx, ry = bx - ax, by - ay
        rlen = math.hypot(rx, ry)
        for j in range(nc):
            cx, cy = cxy[j]
            dx, dy = cxy[(j + 1) % nc]
            ex, ey = dx - cx, dy - cy
            elen = math.hypot(ex, ey)
            denom = rx * ey - ry * ex
            qx, qy = cx - ax, cy - ay
            if abs(denom) <= 1e-14 * rlen * elen:
                # parallel; collinear overlapping edges are a contact case
                if abs(qx * ry - qy * rx) <= tol * rlen:
                    if abs(rx) >= abs(ry):
                        tc, td = (cx - ax) / rx, (dx - ax) / rx
                    else:
                        tc, td = (cy - ay) / ry, (dy - ay) / ry
                    lo, hi = min(tc, td), max(tc, td)
                    if hi >= -tol / rlen and lo <= 1.0 + tol / rlen:
                        raise _Degenerate
                continue
            t = (qx * ey - qy * ex) / denom
            u = (qx * ry - qy * rx) / denom
            tol_t = tol / rlen
            tol_u = tol / elen
            inside_t = -tol_t < t < 1.0 + tol_t
            inside_u = -tol_u < u < 1.0 + tol_u
            if not (inside_t and inside_u):
                continue
            if t < tol_t or t > 1.0 - tol_t or u < tol_u or u > 1.0 - tol_u:
                raise _Degenerate  # endpoint contact
            found.append({
                "i": i, "j": j, "t": t, "u": u,
                "x": ax + t * rx, "y": ay + t * ry,
                "label": "in" if denom < 0.0 else "out",
            })
    return found


def _build_sequence(n: int, tag: str, crossings, edge_key: str, par_key: str):
    """Ring node sequence: vertex node for edge start, then its crossings by parameter."""
    by_edge = {}
    for k, c in enumerate(crossings):
        by_edge.setdefault(c[edge_key], []).append((c[par_key], k))
    seq: List[TraceNode] = []
    pos = {}
    for e in range(n):
        seq.append((tag, e))
        for _, k in sorted(by_edge.get(e, [])):
            pos[k] = len(seq)
            seq.append(("x", k))
    return seq, pos


def _check_alternation(crossings, edge_key: str, par_key: str) -> bool:
    order = sorted(range(len(crossings)), key=lambda k: (crossings[k][edge_key], crossings[k][par_key]))
    labels = [crossings[k]["label"] for k in order]
    return all(labels[i] != labels[(i + 1) % len(labels)] for i in range(len(labels)))


def _clip_once(sxy: np.ndarray, cxy: np.ndarray) -> IntersectionResult:
    d = max(_diag(sxy), _diag(cxy))
    tol = eps_edge(d)
    crossings = _find_crossings(sxy, cxy, tol)

    if not crossings:
        if contains_point(cxy, (sxy[0, 0], sxy[0, 1])):
            return IntersectionResult([], "s_inside_c", abs(signed_area(sxy)))
        if contains_point(sxy, (cxy[0, 0], cxy[0, 1])):
            return IntersectionResult([], "c_inside_s", abs(signed_area(cxy)))
        return IntersectionResult([], "disjoint", 0.0)

    if len(crossings) % 2 != 0:
        raise _Degenerate
    # near-coincident crossings on either ring are ambiguous tangencies
    for a in range(len(crossings)):
        for b in range(a + 1, len(crossings)):
            if math.hypot(crossings[a]["x"] - crossings[b]["x"],
                          crossings[a]["y"] - crossings[b]["y"]) <= tol:
                raise _Degenerate
    if not (_check_alternation(crossings, "i", "t") and _check_alternation(crossings, "j", "u")):
        raise _Degenerate

    ns, nc = sxy.shape[0], cxy.shape[0]
    s_seq, s_pos = _build_sequence(ns, "s", crossings, "i", "t")
    c_seq, c_pos = _build_sequence(nc, "c", crossings, "j", "u")

    visited = [False] * len(crossings)
    pieces: List[Polygon] = []
    traces: List[List[TraceNode]] = []
    guard_limit = 4 * (ns + nc + len(crossings))
    for start in range(len(crossings)):
        if visited[start] or crossings[start]["label"] != "in":
            continue
        trace: List[TraceNode] = []
        cur = start
        on_subject = True
        guard = 0
        while True:
            guard += 1
            if guard > guard_limit:
                raise _Degenerate
            visited[cur] = True
            trace.append(("x", cur))
            seq, pos = (s_seq, s_pos) if on_subject else (c_seq, c_pos)
            idx = pos[cur]
            while True:
                idx = (idx + 1) % len(seq)
                node = seq[idx]
                if node[0] == "x":
                    nxt = node[1]
                    break
                trace.append(node)
            if nxt == start:
                break
            cur = nxt
            on_subject = not on_subject
        if len(trace) < 3:
            raise _Degenerate
        ring = np.array([_node_xy(n, sxy, cxy, crossings) for n in trace])
        if signed_area(ring) <= 0.0:
            raise _Degenerate
        pieces.append(Polygon(ring))
        traces.append(trace)

    nodes = [CrossingNode(Point2(c["x"], c["y"]), c["label"],
                          c["i"] + c["t"], c["j"] + c["u"]) for c in crossings]
    total = float(sum(p.signed_area() for p in pieces))
    return IntersectionResult(pieces, "proper", total, nodes, traces,
                              [(c["i"], c["j"]) for c in crossings])


def _node_xy(node: TraceNode, sxy, cxy, crossings):
    tag, k = node
    if tag == "s":
        return sxy[k]
    if tag == "c":
        return cxy[k]
    c = crossings[k]
    return np.array([c["x"], c["y"]])


def _diag(xy: np.ndarray) -> float:
    mins = xy.min(axis=0)
    maxs = xy.max(axis=0)
    return float(math.hypot(maxs[0] - mins[0], maxs[1] - mins[1]))


def clip_rings(sxy: np.ndarray, cxy: np.ndarray) -> IntersectionResult:
    """Clip two positively-oriented vertex arrays, applying the retry policy.

    Containment of identical rings is exact: the equality fast path and the
    containment branches compute areas from the unperturbed inputs.
    """
    if _rings_cyclically_equal(sxy, cxy):
        return IntersectionResult([], "s_inside_c", abs(signed_area(sxy)))
    try:
        return _clip_once(sxy, cxy)
    except _Degenerate:
        pass
    d = max(_diag(sxy), 1e-12)
    for attempt in range(3):
        delta = 1e-9 * d * (10.0 ** attempt)
        work = perturbed_ring(sxy, delta)
        try:
            res = _clip_once(work, cxy)
        except _Degenerate:
            continue
        res.perturbed = True
        if res.kind == "s_inside_c":
            res.area = abs(signed_area(sxy))  # report the unperturbed area
        return res
    raise TopologyUnresolved(
        "clipping could not be resolved after 3 perturbation retries")


def weiler_atherton(subject: Polygon, clip: Polygon) -> IntersectionResult:
    """Intersection of two simple polygons; see the module docstring for steps.

    Inputs may have either orientation; rings are normalized to clockwise on
    screen before clipping.  Raises NotSimple when an input self-intersects.
    """
    for name, p in (("subject", subject), ("clip", clip)):
        if p.simple is None:
            p.simple = is_simple(p)
        if not p.simple:
            raise NotSimple(f"{name} polygon self-intersects")
    return clip_rings(subject.clockwise().xy, clip.clockwise().xy)


def intersection_area(subject: Polygon, clip: Polygon, policy: str = "paper") -> float:
    """Intersection area under the chosen no-intersection convention.

    ``paper`` maps disjoint pairs to min(area(subject), area(clip)), reading
    "the smallest one of the two" literally; ``strict`` maps them to 0.
    Containment gives the inner polygon's area under both policies.
    """
    if policy not in ("paper", "strict"):
        raise ValueError(f"unknown policy {policy!r}")
    res = weiler_atherton(subject, clip)
    if res.kind == "disjoint" and policy == "paper":
        return min(subject.area(), clip.area())
    return res.area
