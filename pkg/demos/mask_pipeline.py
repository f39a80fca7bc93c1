"""End-to-end tour: instance mask -> ray-cast polygons -> AP evaluation.

Synthesizes a two-object label mask, extracts 16-gon ground truth from it,
then scores three detectors against that GT: a perfect one, one with sloppy
polygons, and one that misses an object.  Finishes with the oracle protocol,
which rescores the sloppy polygons with detection taken out of the picture.

Run: python3 demos/mask_pipeline.py [--workdir /tmp/polyloss-demo]
"""

import argparse
import json
import os

import numpy as np

from polyloss import (
    CARTESIAN,
    GtPolygonSpec,
    InstanceRecord,
    average_precision,
    encode,
    load_mask,
    mask_to_polygon,
    oracle_eval,
    write_instance_file,
)
from polyloss.svg import GT_STYLE, PRED_STYLE, write_svg


def synth_mask(path):
    grid = np.zeros((80, 120), dtype=np.int64)
    yy, xx = np.ogrid[:80, :120]
    grid[(xx - 35) ** 2 + (yy - 40) ** 2 <= 24**2] = 1
    grid[np.abs(xx - 88) + np.abs(yy - 36) <= 22] = 2  # diamond
    with open(path, "wb") as fh:
        fh.write(b"P5\n120 80\n65535\n" + grid.astype(">u2").tobytes())
    with open(os.path.splitext(path)[0] + ".labels.json", "w") as fh:
        json.dump({"1": "car", "2": "truck"}, fh)
    return path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workdir", default="/tmp/polyloss-demo")
    args = ap.parse_args()
    os.makedirs(args.workdir, exist_ok=True)

    mask_path = synth_mask(os.path.join(args.workdir, "scene.pgm"))
    mask = load_mask(mask_path)
    print(f"mask {mask.width}x{mask.height}, instances {mask.instance_ids()}")

    gts = []
    for i in mask.instance_ids():
        poly, center = mask_to_polygon(mask.binary(i), GtPolygonSpec(16))
        gts.append(InstanceRecord("scene", mask.categories[i], 1.0, center, poly))
    sizes = {"scene": (mask.width, mask.height)}
    gt_path = os.path.join(args.workdir, "gt.json")
    write_instance_file(gt_path, gts, sizes)
    print(f"ground truth written to {gt_path}")

    sloppy = [InstanceRecord(g.image_id, g.category, 0.9, g.center,
                             g.polygon.scaled(0.82, about=g.center.as_tuple()))
              for g in gts]
    missing = [g for g in gts[:1]]

    for name, preds in (("perfect detector", gts),
                        ("sloppy polygons", sloppy),
                        ("dropped object", missing)):
        res = average_precision(preds, gts, image_sizes=sizes)
        print(f"\n== {name}: ap {res.ap:.3f}, ap50 {res.ap50:.3f}")
        print(res.to_table())

    field = {(g.center.x, g.center.y): encode(p.polygon, p.center, CARTESIAN)
             for g, p in zip(gts, sloppy)}
    res = oracle_eval(gts, field, image_sizes=sizes)
    print(f"\n== oracle over the sloppy polygons: ap {res.ap:.3f}, ap50 {res.ap50:.3f}")

    svg_path = os.path.join(args.workdir, "overlay.svg")
    layers = [(g.polygon, GT_STYLE, g.category) for g in gts]
    layers += [(p.polygon, PRED_STYLE, f"{p.category} {p.score}") for p in sloppy]
    write_svg(svg_path, layers, mask.width, mask.height)
    print(f"overlay written to {svg_path}")


if __name__ == "__main__":
    main()
