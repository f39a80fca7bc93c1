"""Command-line surface over ingestion, losses, GT generation, and evaluation.

Machine-readable results go to standard output as JSON; tables and progress
notes go to standard error.  Exit codes: 0 success, 1 failed check
(gradcheck), 2 bad input or format, 3 domain error (empty mask, missing
center, unresolved topology), 4 internal error.

POLYLOSS_THREADS caps the worker threads used for per-instance work
(0 or unset = one worker per core); output order always follows input order.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .autodiff import finite_diff_check
from .batch import BatchRequest, batch_poly_loss
from .clipping import intersection_area
from .codes import CARTESIAN, POLAR, decode, encode, sort_by_angle
from .errors import (
    DegeneratePolygon,
    EmptyMask,
    FormatError,
    MissingCenter,
    NotSimple,
    ShapeMismatch,
    TopologyUnresolved,
    WrongSystem,
)
from .evaluation import (
    InstanceRecord,
    average_precision,
    bench,
    instance_doc,
    oracle_eval,
    read_instance_file,
    write_instance_file,
)
from .gt import GtPolygonSpec, load_mask, mask_to_polygon
from .losses import IouObjective, iou_loss
from .svg import GT_STYLE, PRED_STYLE, write_svg

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_INTERNAL = 4

DOMAIN_ERRORS = (EmptyMask, MissingCenter, TopologyUnresolved, NotSimple,
                 DegeneratePolygon)
INPUT_ERRORS = (FormatError, ShapeMismatch, WrongSystem, ValueError, OSError)

ORACLE_MATCH_RADIUS = 3.0


@dataclass
class RunConfig:
    """Validated invocation: defaults mirror the shipped configuration."""

    subcommand: str
    inputs: List[str] = field(default_factory=list)
    output: Optional[str] = None
    n_vertices: int = 16
    system: str = CARTESIAN
    policy: str = "paper"
    seed: int = 0
    dump_svg: Optional[str] = None

    def __post_init__(self):
        for path in self.inputs:
            if not os.path.exists(path):
                raise OSError(f"input file not found: {path}")


def _threads() -> int:
    raw = os.environ.get("POLYLOSS_THREADS", "0")
    try:
        v = int(raw)
    except ValueError:
        raise ValueError(f"POLYLOSS_THREADS must be an integer, got {raw!r}")
    if v < 0:
        raise ValueError(f"POLYLOSS_THREADS must be >= 0, got {v}")
    return v if v > 0 else (os.cpu_count() or 1)


def _ordered_map(fn, items):
    """Map preserving input order, fanned out per POLYLOSS_THREADS."""
    items = list(items)
    workers = min(_threads(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _emit(payload) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, indent=1))
    sys.stdout.write("\n")


def _note(text: str) -> None:
    sys.stderr.write(text + "\n")


def _svg_canvas(sizes, records) -> Tuple[float, float]:
    if sizes:
        return (max(w for w, _ in sizes.values()), max(h for _, h in sizes.values()))
    w = max(float(r.polygon.xy[:, 0].max()) for r in records) + 1
    h = max(float(r.polygon.xy[:, 1].max()) for r in records) + 1
    return w, h


def _dump_overlay(path, preds, gts, sizes) -> None:
    w, h = _svg_canvas(sizes, list(preds) + list(gts))
    layers = [(r.polygon, GT_STYLE, f"gt {r.category}") for r in gts]
    layers += [(r.polygon, PRED_STYLE, f"{r.category} {r.score:.2f}") for r in preds]
    write_svg(path, layers, w, h)


def cmd_iou(cfg: RunConfig) -> int:
    file_a, file_b = cfg.inputs
    preds, sizes_a = read_instance_file(file_a)
    gts, sizes_b = read_instance_file(file_b)
    if len(preds) != len(gts):
        raise FormatError(f"instance counts differ: {file_a} has {len(preds)}, "
                          f"{file_b} has {len(gts)}")

    def one(pair):
        i, (p, g) = pair
        code = encode(p.polygon, p.center, cfg.system)
        rep = iou_loss(code, g.polygon, cfg.policy)
        subject = decode(sort_by_angle(code))
        inter = intersection_area(subject, g.polygon, cfg.policy)
        return {
            "index": i,
            "loss": rep.total,
            "iou": 1.0 - rep.total,
            "area_pred": p.polygon.area(),
            "area_gt": g.polygon.area(),
            "area_intersection": inter,
        }

    rows = _ordered_map(one, enumerate(zip(preds, gts)))
    if cfg.dump_svg:
        _dump_overlay(cfg.dump_svg, preds, gts, {**sizes_a, **sizes_b})
    _emit(rows)
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig, h_rel: float, rtol: float) -> int:
    records, _ = read_instance_file(cfg.inputs[0])
    if not records:
        raise FormatError(f"{cfg.inputs[0]}: no instances to check")
    if len(records) % 2 != 0:
        raise FormatError(f"{cfg.inputs[0]}: gradcheck consumes (pred, gt) "
                          f"instance pairs, got an odd count {len(records)}")
    pairs = [(records[k], records[k + 1]) for k in range(0, len(records), 2)]

    def one(pair):
        p, g = pair
        code = encode(p.polygon, p.center, cfg.system)
        h = h_rel * p.polygon.diameter()
        fd = finite_diff_check(IouObjective(code, g.polygon, cfg.policy),
                               code, h=h, rtol=rtol)
        return {
            "passed": bool(fd.passed),
            "n_flagged": int(fd.n_flagged),
            "n_coords": int(fd.grad.size),
            "max_rel_err": float(fd.max_rel_err),
        }

    rows = _ordered_map(one, pairs)
    for i, row in enumerate(rows):
        row["pair"] = i
    ok = all(r["passed"] for r in rows)
    _emit({"passed": ok, "pairs": rows})
    _note(f"gradcheck: {sum(r['passed'] for r in rows)}/{len(rows)} pairs pass "
          f"(h={h_rel:g}*diam, rtol={rtol:g})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_gtgen(cfg: RunConfig) -> int:
    mask_path = cfg.inputs[0]
    mask = load_mask(mask_path)
    ids = mask.instance_ids()
    if not ids:
        raise EmptyMask(f"{mask_path}: no foreground instances")
    image_id = os.path.splitext(os.path.basename(mask_path))[0]
    spec = GtPolygonSpec(cfg.n_vertices)

    def one(instance_id):
        poly, center = mask_to_polygon(mask.binary(instance_id), spec)
        return InstanceRecord(image_id, mask.categories[instance_id], 1.0,
                              center, poly)

    records = _ordered_map(one, ids)
    sizes = {image_id: (mask.width, mask.height)}
    if cfg.dump_svg:
        _dump_overlay(cfg.dump_svg, [], records, sizes)
    if cfg.output:
        write_instance_file(cfg.output, records, sizes)
        _note(f"wrote {len(records)} instances to {cfg.output}")
    else:
        _emit(instance_doc(records, sizes))
    return EXIT_OK


def _oracle_field(preds, gts):
    by_image = {}
    for p in preds:
        by_image.setdefault(p.image_id, []).append(p)
    fld = {}
    for g in gts:
        best = None
        best_d = math.inf
        for p in by_image.get(g.image_id, ()):
            d = math.hypot(p.center.x - g.center.x, p.center.y - g.center.y)
            if d < best_d:
                best, best_d = p, d
        if best is None or best_d > ORACLE_MATCH_RADIUS:
            raise MissingCenter(
                f"no prediction within {ORACLE_MATCH_RADIUS:g} px of GT center "
                f"({g.center.x:g}, {g.center.y:g}) in image {g.image_id!r}")
        fld[(g.center.x, g.center.y)] = encode(best.polygon, best.center, CARTESIAN)
    return fld


def cmd_eval(cfg: RunConfig, oracle: bool, width: Optional[int],
             height: Optional[int]) -> int:
    pred_path, gt_path = cfg.inputs
    preds, sizes_p = read_instance_file(pred_path)
    gts, sizes_g = read_instance_file(gt_path)
    sizes = {**sizes_p, **sizes_g}
    if width is not None and height is not None:
        sizes = {r.image_id: (width, height) for r in list(preds) + list(gts)}
    if oracle:
        result = oracle_eval(gts, _oracle_field(preds, gts), image_sizes=sizes)
    else:
        result = average_precision(preds, gts, image_sizes=sizes)
    if cfg.dump_svg:
        _dump_overlay(cfg.dump_svg, preds, gts, sizes)
    _emit(result.as_dict())
    _note(result.to_table())
    return EXIT_OK


def cmd_bench(cfg: RunConfig, pairs: int) -> int:
    report = bench(pairs, cfg.n_vertices, seed=cfg.seed)
    _emit(report.as_dict())
    _note(f"bench: median {report.median_us:.2f} us, p99 {report.p99_us:.2f} us "
          f"over {pairs} pairs at n={cfg.n_vertices}")
    return EXIT_OK


def cmd_batch_loss(cfg: RunConfig) -> int:
    path = cfg.inputs[0]
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"bad JSON in {path}: {e.msg}", offset=e.pos)
    try:
        req = BatchRequest(
            count=int(doc["count"]),
            n_vertices=int(doc["n_vertices"]),
            pred_coords=np.asarray(doc["pred_coords"], dtype=np.float64),
            centers=np.asarray(doc["centers"], dtype=np.float64),
            gt_vertices=np.asarray(doc["gt_vertices"], dtype=np.float64).reshape(-1, 2),
            gt_offsets=np.asarray(doc["gt_offsets"], dtype=np.int64),
            system=str(doc.get("system", CARTESIAN)),
            use_l1=bool(doc.get("use_l1", True)),
            use_iou=bool(doc.get("use_iou", True)),
            use_order=bool(doc.get("use_order", False)),
            policy=str(doc.get("policy", "paper")),
        )
    except (KeyError, TypeError) as e:
        raise FormatError(f"{path}: malformed batch request: {e}")
    res = batch_poly_loss(req)
    _emit({
        "status": res.status,
        "message": res.message,
        "losses": [float(v) for v in res.losses],
        "grads": [[float(v) for v in row] for row in res.grads],
    })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="polyloss",
        description="Polygon IoU losses, ray-cast GT polygons, and AP evaluation.")
    ap.add_argument("--version", action="version", version=f"polyloss {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p, svg=False):
        p.add_argument("--system", choices=[CARTESIAN, POLAR], default=CARTESIAN)
        p.add_argument("--policy", choices=["paper", "strict"], default="paper")
        if svg:
            p.add_argument("--dump-svg", metavar="PATH",
                           help="write a polygon overlay SVG")

    p = sub.add_parser("iou", help="per-pair IoU and loss between two instance files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    common(p, svg=True)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check over (pred, gt) instance pairs")
    p.add_argument("file")
    p.add_argument("--h", type=float, default=1e-6,
                   help="probe step relative to the prediction diameter")
    p.add_argument("--rtol", type=float, default=1e-4)
    common(p)

    p = sub.add_parser("gtgen", help="ray-cast GT polygons from an instance mask")
    p.add_argument("mask")
    p.add_argument("--n-vertices", type=int, default=16)
    p.add_argument("--out", metavar="PATH",
                   help="output instance JSON (default: standard output)")
    p.add_argument("--dump-svg", metavar="PATH")

    p = sub.add_parser("eval", help="COCO-style AP of predictions against GT")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--oracle", action="store_true",
                   help="score pred polygons at GT centers (perfect detection)")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--dump-svg", metavar="PATH")

    p = sub.add_parser("bench", help="latency of the IoU loss value+gradient kernel")
    p.add_argument("--pairs", type=int, default=2000)
    p.add_argument("--n-vertices", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("batch-loss",
                       help="run a JSON batch request through the combined loss")
    p.add_argument("request")

    return ap


def _dispatch(args) -> int:
    if args.subcommand == "iou":
        cfg = RunConfig("iou", [args.file_a, args.file_b], system=args.system,
                        policy=args.policy, dump_svg=args.dump_svg)
        return cmd_iou(cfg)
    if args.subcommand == "gradcheck":
        cfg = RunConfig("gradcheck", [args.file], system=args.system,
                        policy=args.policy)
        return cmd_gradcheck(cfg, args.h, args.rtol)
    if args.subcommand == "gtgen":
        cfg = RunConfig("gtgen", [args.mask], output=args.out,
                        n_vertices=args.n_vertices, dump_svg=args.dump_svg)
        return cmd_gtgen(cfg)
    if args.subcommand == "eval":
        cfg = RunConfig("eval", [args.pred, args.gt], dump_svg=args.dump_svg)
        return cmd_eval(cfg, args.oracle, args.width, args.height)
    if args.subcommand == "bench":
        cfg = RunConfig("bench", n_vertices=args.n_vertices, seed=args.seed)
        return cmd_bench(cfg, args.pairs)
    if args.subcommand == "batch-loss":
        cfg = RunConfig("batch-loss", [args.request])
        return cmd_batch_loss(cfg)
    raise RuntimeError(f"unhandled subcommand {args.subcommand!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except DOMAIN_ERRORS as e:
        _note(f"error: {type(e).__name__}: {e}")
        return EXIT_DOMAIN
    except INPUT_ERRORS as e:
        _note(f"error: {type(e).__name__}: {e}")
        return EXIT_INPUT
    except Exception:
        _note("internal error:")
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
