"""Minimal SVG polygon overlay writer for eyeballing results.

No external renderer: the output is a plain <svg> document with one
<polygon> element per ring, drawn in image coordinates (y grows downward,
matching the rest of the package).
"""

from __future__ import annotations

from typing import Iterable, Optional, Tuple

from .geometry import RingLike, ring_array

__all__ = ["render_svg", "write_svg", "PRED_STYLE", "GT_STYLE"]

PRED_STYLE = "#d62728"
GT_STYLE = "#2ca02c"

HEADER = ('<svg xmlns="http://www.w3.org/2000/svg" '
          'viewBox="0 0 {w} {h}" width="{w}" height="{h}">')


def _polygon_element(ring: RingLike, stroke: str, label: Optional[str]) -> str:
    xy = ring_array(ring)
    points = " ".join(f"{x:.3f},{y:.3f}" for x, y in xy)
    title = f"<title>{label}</title>" if label else ""
    return (f'<polygon points="{points}" fill="{stroke}" fill-opacity="0.15" '
            f'stroke="{stroke}" stroke-width="1">{title}</polygon>')


def render_svg(layers: Iterable[Tuple[RingLike, str, Optional[str]]],
               width: float, height: float) -> str:
    """Document with one polygon per (ring, color, label) layer."""
    parts = [HEADER.format(w=width, h=height)]
    parts.append(f'<rect width="{width}" height="{height}" fill="#fff"/>')
    for ring, stroke, label in layers:
        parts.append(_polygon_element(ring, stroke, label))
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(path: str, layers: Iterable[Tuple[RingLike, str, Optional[str]]],
              width: float, height: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_svg(layers, width, height))
        fh.write("\n")
