import json
import random
import subprocess
import sys

import numpy as np
import pytest

from polygen import overlapping_pair
from polyloss.cli import (
    EXIT_CHECK_FAILED,
    EXIT_DOMAIN,
    EXIT_INPUT,
    EXIT_OK,
    main,
)
from polyloss.evaluation import InstanceRecord, write_instance_file
from polyloss.geometry import Point2, Polygon

SQUARE = Polygon([(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)])
SQUARE_SHIFTED = Polygon([(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)])


def write_instances(path, entries, sizes=None):
    records = [InstanceRecord(img, cat, score, poly.centroid(), poly)
               for img, cat, score, poly in entries]
    write_instance_file(str(path), records, image_sizes=sizes)
    return str(path)


def write_pgm(path, grid):
    h, w = grid.shape
    path.write_bytes(f"P5\n{w} {h}\n65535\n".encode()
                     + np.asarray(grid).astype(">u2").tobytes())
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_version_via_console_entry():
    proc = subprocess.run([sys.executable, "-m", "polyloss.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip().startswith("polyloss ")


def test_iou_identical_files_all_zero(tmp_path, capsys):
    f = write_instances(tmp_path / "a.json",
                        [("img", "car", 1.0, SQUARE), ("img", "bus", 1.0, SQUARE_SHIFTED)])
    code, out, err = run(capsys, "iou", f, f)
    assert code == EXIT_OK
    rows = json.loads(out)
    assert [r["loss"] for r in rows] == [0.0, 0.0]
    assert [r["iou"] for r in rows] == [1.0, 1.0]
    assert rows[0]["area_pred"] == rows[0]["area_gt"] == 4.0


def test_iou_two_squares_fixture(tmp_path, capsys):
    fa = write_instances(tmp_path / "a.json", [("img", "car", 1.0, SQUARE)])
    fb = write_instances(tmp_path / "b.json", [("img", "car", 1.0, SQUARE_SHIFTED)])
    code, out, _ = run(capsys, "iou", fa, fb)
    assert code == EXIT_OK
    row = json.loads(out)[0]
    assert row["loss"] == pytest.approx(6.0 / 7.0, abs=1e-9)
    assert row["area_intersection"] == pytest.approx(1.0, abs=1e-12)


def test_iou_count_mismatch_names_both_files(tmp_path, capsys):
    fa = write_instances(tmp_path / "a.json", [("img", "car", 1.0, SQUARE)])
    fb = write_instances(tmp_path / "b.json",
                         [("img", "car", 1.0, SQUARE), ("img", "car", 1.0, SQUARE)])
    code, out, err = run(capsys, "iou", fa, fb)
    assert code == EXIT_INPUT
    assert "a.json" in err and "b.json" in err


def test_iou_dump_svg_writes_an_overlay(tmp_path, capsys):
    f = write_instances(tmp_path / "a.json", [("img", "car", 1.0, SQUARE)],
                        sizes={"img": (8, 8)})
    svg = tmp_path / "overlay.svg"
    code, _, _ = run(capsys, "iou", f, f, "--dump-svg", str(svg))
    assert code == EXIT_OK
    text = svg.read_text()
    assert text.startswith("<svg") and "<polygon" in text


def pair_file(tmp_path, seed=11, count=5):
    rng = random.Random(seed)
    records = []
    for k in range(count):
        pred, gt = overlapping_pair(rng, 12, 12, cx=30.0, cy=30.0, radius=10.0)
        records.append(InstanceRecord(f"im{k}", "car", 1.0, pred.centroid(), pred))
        records.append(InstanceRecord(f"im{k}", "car", 1.0, gt.centroid(), gt))
    path = tmp_path / "pairs.json"
    write_instance_file(str(path), records)
    return str(path)


def test_gradcheck_random_suite_passes(tmp_path, capsys):
    f = pair_file(tmp_path)
    code, out, err = run(capsys, "gradcheck", f)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["passed"] is True
    assert all(r["n_flagged"] == 0 for r in doc["pairs"])
    assert "pass" in err


def test_gradcheck_empty_file_is_input_error(tmp_path, capsys):
    p = tmp_path / "empty.json"
    p.write_text("[]")
    code, _, err = run(capsys, "gradcheck", str(p))
    assert code == EXIT_INPUT


def test_gradcheck_odd_count_is_input_error(tmp_path, capsys):
    f = write_instances(tmp_path / "odd.json", [("img", "car", 1.0, SQUARE)])
    code, _, err = run(capsys, "gradcheck", f)
    assert code == EXIT_INPUT
    assert "pairs" in err


def test_gtgen_rectangle_and_rerun_identical(tmp_path, capsys):
    grid = np.zeros((40, 60), dtype=np.int64)
    grid[5:25, 10:40] = 1
    mask = write_pgm(tmp_path / "scene.pgm", grid)
    (tmp_path / "scene.labels.json").write_text('{"1": "car"}')
    out1 = tmp_path / "gt1.json"
    out2 = tmp_path / "gt2.json"
    assert run(capsys, "gtgen", mask, "--out", str(out1))[0] == EXIT_OK
    assert run(capsys, "gtgen", mask, "--out", str(out2))[0] == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    assert doc[0]["width"] == 60 and doc[0]["height"] == 40
    inst = doc[0]["instances"][0]
    assert inst["category"] == "car"
    assert len(inst["vertices"]) == 16

    code, out, _ = run(capsys, "gtgen", mask, "--n-vertices", "32")
    assert code == EXIT_OK
    assert len(json.loads(out)[0]["instances"][0]["vertices"]) == 32


def test_gtgen_empty_mask_is_domain_error(tmp_path, capsys):
    mask = write_pgm(tmp_path / "empty.pgm", np.zeros((8, 8), dtype=np.int64))
    code, _, err = run(capsys, "gtgen", mask)
    assert code == EXIT_DOMAIN
    assert "EmptyMask" in err


def test_eval_perfect_predictions(tmp_path, capsys):
    f = write_instances(tmp_path / "gt.json",
                        [("img", "car", 1.0, SQUARE.scaled(5.0))],
                        sizes={"img": (20, 20)})
    code, out, err = run(capsys, "eval", f, f)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["ap"] == 1.0 and doc["ap50"] == 1.0
    assert "mean" in err  # table goes to stderr


def test_eval_single_pair_iou_six_tenths(tmp_path, capsys):
    gt = write_instances(tmp_path / "gt.json",
                         [("img", "car", 1.0, Polygon([(0, 0), (10, 0), (10, 10), (0, 10)]))],
                         sizes={"img": (20, 20)})
    pred = write_instances(tmp_path / "pred.json",
                           [("img", "car", 1.0, Polygon([(0, 0), (6, 0), (6, 10), (0, 10)]))],
                           sizes={"img": (20, 20)})
    code, out, _ = run(capsys, "eval", pred, gt)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["ap50"] == 1.0
    assert doc["ap"] == pytest.approx(0.30, abs=1e-12)


def test_eval_oracle_missing_center(tmp_path, capsys):
    gt = write_instances(tmp_path / "gt.json", [("img", "car", 1.0, SQUARE)])
    pred = write_instances(tmp_path / "pred.json",
                           [("img", "car", 1.0, SQUARE.translated(9.0, 0.0))])
    code, _, err = run(capsys, "eval", pred, gt, "--oracle")
    assert code == EXIT_DOMAIN
    assert "MissingCenter" in err


def test_eval_oracle_matches_within_radius(tmp_path, capsys):
    gt = write_instances(tmp_path / "gt.json", [("img", "car", 1.0, SQUARE.scaled(5.0))],
                         sizes={"img": (20, 20)})
    nudged = SQUARE.scaled(5.0).translated(1.5, 0.0)
    pred = write_instances(tmp_path / "pred.json", [("img", "car", 0.4, nudged)],
                           sizes={"img": (20, 20)})
    code, out, _ = run(capsys, "eval", pred, gt, "--oracle")
    assert code == EXIT_OK
    # oracle rescores the nudged polygon at score 1.0; overlap 8.5/11.5
    assert json.loads(out)["ap50"] == 1.0


def test_bench_seed_reproduces_checksums(capsys):
    code, out, _ = run(capsys, "bench", "--pairs", "16", "--seed", "5")
    assert code == EXIT_OK
    first = json.loads(out)
    code, out, _ = run(capsys, "bench", "--pairs", "16", "--seed", "5")
    second = json.loads(out)
    assert first["loss_checksum"] == second["loss_checksum"]
    assert first["losses_head"] == second["losses_head"]
    assert first["median_us"] > 0.0


def test_bench_zero_pairs_is_input_error(capsys):
    code, _, err = run(capsys, "bench", "--pairs", "0")
    assert code == EXIT_INPUT


def batch_request_doc(count=1):
    coords = []
    for x, y in SQUARE.xy:
        coords += [x - 1.0, y - 1.0]
    return {
        "count": count,
        "n_vertices": 4,
        "pred_coords": coords * count,
        "centers": [1.0, 1.0] * count,
        "gt_vertices": [list(v) for v in SQUARE_SHIFTED.xy] * count,
        "gt_offsets": [4 * k for k in range(count + 1)],
        "use_l1": False,
    }


def test_batch_loss_subcommand(tmp_path, capsys):
    p = tmp_path / "req.json"
    p.write_text(json.dumps(batch_request_doc(3)))
    code, out, _ = run(capsys, "batch-loss", str(p))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["status"] == 0
    assert doc["losses"] == [pytest.approx(6.0 / 7.0, abs=1e-9)] * 3
    assert len(doc["grads"][0]) == 8


def test_batch_loss_bad_buffers_stay_exit_zero(tmp_path, capsys):
    req = batch_request_doc()
    req["pred_coords"] = req["pred_coords"][:-1]
    p = tmp_path / "req.json"
    p.write_text(json.dumps(req))
    code, out, _ = run(capsys, "batch-loss", str(p))
    assert code == EXIT_OK  # the payload carries the status
    doc = json.loads(out)
    assert doc["status"] == 2
    assert doc["losses"] == []
    assert "pred_coords" in doc["message"]


def test_batch_loss_unparseable_request_is_input_error(tmp_path, capsys):
    p = tmp_path / "req.json"
    p.write_text("{\"count\": 1}")
    code, _, err = run(capsys, "batch-loss", str(p))
    assert code == EXIT_INPUT
    p.write_text("{nope")
    assert run(capsys, "batch-loss", str(p))[0] == EXIT_INPUT


def test_missing_input_file_is_input_error(capsys):
    code, _, err = run(capsys, "iou", "/nonexistent/a.json", "/nonexistent/b.json")
    assert code == EXIT_INPUT
    assert "not found" in err


def test_thread_env_does_not_change_output(tmp_path, capsys, monkeypatch):
    f = pair_file(tmp_path, seed=3, count=6)
    monkeypatch.setenv("POLYLOSS_THREADS", "1")
    _, serial, _ = run(capsys, "iou", f, f)
    monkeypatch.setenv("POLYLOSS_THREADS", "4")
    _, threaded, _ = run(capsys, "iou", f, f)
    assert serial == threaded
    monkeypatch.setenv("POLYLOSS_THREADS", "banana")
    assert run(capsys, "iou", f, f)[0] == EXIT_INPUT


def test_polar_system_flag(tmp_path, capsys):
    f = write_instances(tmp_path / "a.json", [("img", "car", 1.0, SQUARE)])
    code, out, _ = run(capsys, "iou", f, f, "--system", "polar")
    assert code == EXIT_OK
    assert json.loads(out)[0]["loss"] == 0.0
