"""Fit a polygon to a target by gradient descent on the combined loss.

A blob-shaped target is approximated starting from a small regular 16-gon;
plain SGD on the vertex code drives the IoU term (plus L1 against the
ray-cast code of the target) until the two rings nearly coincide.

Run: python3 demos/fit_polygon.py [--steps 400] [--svg out.svg]
"""

import argparse
import math

import numpy as np

from polyloss import (
    CARTESIAN,
    LossConfig,
    Point2,
    Polygon,
    VertexCode,
    encode,
    poly_loss,
)
from polyloss.svg import GT_STYLE, PRED_STYLE, write_svg


def target_polygon(n=16):
    # lumpy star around (50, 50)
    ts = np.arange(n) * 2.0 * math.pi / n
    r = 20.0 + 6.0 * np.sin(3.0 * ts) + 3.0 * np.cos(5.0 * ts)
    xy = np.column_stack([50.0 + r * np.cos(ts), 50.0 + r * np.sin(ts)])
    return Polygon(xy, simple=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--lr", type=float, default=4.0)
    ap.add_argument("--svg", help="write a before/after overlay")
    args = ap.parse_args()

    gt = target_polygon()
    center = gt.centroid()
    gt_code = encode(gt, center, CARTESIAN)

    # start from a small centered regular ring
    ts = np.arange(16) * 2.0 * math.pi / 16
    coords = np.empty(32)
    coords[0::2] = 8.0 * np.cos(ts)
    coords[1::2] = 8.0 * np.sin(ts)
    start = Polygon(coords.reshape(-1, 2) + np.array([center.x, center.y]))

    cfg = LossConfig(use_l1=True, use_iou=True, weight_l1=0.2)
    for step in range(args.steps + 1):
        code = VertexCode(center, coords, CARTESIAN)
        rep = poly_loss(code, gt, gt_code, cfg)
        if step % (args.steps // 8) == 0:
            print(f"step {step:4d}  total {rep.total:.5f}  "
                  + "  ".join(f"{k} {v:.5f}" for k, v in sorted(rep.per_term.items())))
        coords = coords - args.lr * rep.grad

    final = VertexCode(center, coords, CARTESIAN)
    print(f"final iou loss: {poly_loss(final, gt, gt_code, cfg).per_term['iou']:.5f}")

    if args.svg:
        fitted = coords.reshape(-1, 2) + np.array([center.x, center.y])
        write_svg(args.svg, [
            (gt, GT_STYLE, "target"),
            (start, "#999999", "initial"),
            (Polygon(fitted), PRED_STYLE, "fitted"),
        ], 100, 100)
        print(f"overlay written to {args.svg}")


if __name__ == "__main__":
    main()
