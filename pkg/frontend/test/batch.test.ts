import { describe, expect, test } from "vitest";

import {
  BAD_REQUEST,
  CLI_FAILED,
  ELEMENT_FAILED,
  OK,
  batchPolyLoss,
  requestDoc,
  type BatchRequest,
} from "../src/index.js";

// Unit squares offset by one: intersection 1, union 7. The reference loss is
// what the Python path computes for this pair, one ulp away from 6/7.
const TWO_SQUARES_LOSS = 0.8571428571428572;
const TWO_SQUARES_GRAD = [
  -0.02040816326530612, -0.02040816326530612,
  -0.02040816326530612, -0.02040816326530612,
  -0.10204081632653061, -0.10204081632653061,
  -0.02040816326530612, -0.02040816326530612,
];

const PRED_SQUARE: [number, number][] = [[0, 0], [2, 0], [2, 2], [0, 2]];
const GT_SQUARE: [number, number][] = [[1, 1], [3, 1], [3, 3], [1, 3]];

function twoSquares(count: number): BatchRequest {
  const predCoords = new Float64Array(count * 8);
  const centers = new Float64Array(count * 2);
  const gtVertices = new Float64Array(count * 8);
  const gtOffsets: number[] = [0];
  for (let i = 0; i < count; i++) {
    PRED_SQUARE.forEach(([x, y], k) => {
      predCoords[i * 8 + 2 * k] = x - 1.0;
      predCoords[i * 8 + 2 * k + 1] = y - 1.0;
    });
    centers[2 * i] = 1.0;
    centers[2 * i + 1] = 1.0;
    GT_SQUARE.forEach(([x, y], k) => {
      gtVertices[i * 8 + 2 * k] = x;
      gtVertices[i * 8 + 2 * k + 1] = y;
    });
    gtOffsets.push(4 * (i + 1));
  }
  return {
    count,
    nVertices: 4,
    predCoords,
    centers,
    gtVertices,
    gtOffsets,
    useL1: false,
  };
}

describe("batchPolyLoss", () => {
  test("64 two-squares elements match the reference loss bit for bit", async () => {
    const res = await batchPolyLoss(twoSquares(64));
    expect(res.status).toBe(OK);
    expect(res.message).toBe("");
    expect(res.losses.length).toBe(64);
    for (const loss of res.losses) {
      expect(loss).toBe(TWO_SQUARES_LOSS);
    }
    expect(res.grads.length).toBe(64);
    expect(Array.from(res.grads[0])).toEqual(TWO_SQUARES_GRAD);
    expect(Array.from(res.grads[63])).toEqual(TWO_SQUARES_GRAD);
  });

  test("identical pair costs exactly zero", async () => {
    const req = twoSquares(1);
    req.gtVertices = Float64Array.from(PRED_SQUARE.flat());
    const res = await batchPolyLoss(req);
    expect(res.status).toBe(OK);
    expect(res.losses[0]).toBe(0);
  });

  test("short pred_coords buffer is rejected without output", async () => {
    const req = twoSquares(2);
    req.predCoords = (req.predCoords as Float64Array).subarray(0, 15);
    const res = await batchPolyLoss(req);
    expect(res.status).toBe(BAD_REQUEST);
    expect(res.message).toContain("pred_coords");
    expect(res.losses.length).toBe(0);
    expect(res.grads.length).toBe(0);
  });

  test("degenerate element reports its index, not an exception", async () => {
    const req = twoSquares(2);
    // collapse the second ring to a segment
    const gt = req.gtVertices as Float64Array;
    gt.set([0, 0, 1, 0, 2, 0, 3, 0], 8);
    const res = await batchPolyLoss(req);
    expect(res.status).toBe(ELEMENT_FAILED);
    expect(res.message).toContain("element 1");
    expect(res.losses.length).toBe(0);
  });

  test("missing binary surfaces as a status, never a throw", async () => {
    const saved = process.env.POLYLOSS_BIN;
    process.env.POLYLOSS_BIN = "/nonexistent/polyloss";
    try {
      const res = await batchPolyLoss(twoSquares(1));
      expect(res.status).toBe(CLI_FAILED);
      expect(res.message).toContain("could not run CLI");
    } finally {
      if (saved === undefined) delete process.env.POLYLOSS_BIN;
      else process.env.POLYLOSS_BIN = saved;
    }
  });

  test("request document uses the wire field names and defaults", () => {
    const doc = requestDoc(twoSquares(1));
    expect(doc.n_vertices).toBe(4);
    expect(doc.use_l1).toBe(false);
    expect(doc.use_iou).toBe(true);
    expect(doc.use_order).toBe(false);
    expect(doc.system).toBe("cartesian");
    expect(doc.policy).toBe("paper");
    expect(doc.gt_offsets).toEqual([0, 4]);
  });
});
