import { mkdtemp, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { runCli } from "./runner.js";

export const OK = 0;
export const BAD_REQUEST = 2;
export const ELEMENT_FAILED = 3;
/** Local-only status: the CLI process itself failed or answered garbage. */
export const CLI_FAILED = 4;

export const CARTESIAN = "cartesian";
export const POLAR = "polar";

export interface BatchRequest {
  /** Number of polygon pairs in the batch. */
  count: number;
  /** Vertices per predicted polygon. */
  nVertices: number;
  /** count * 2 * nVertices prediction values, element-major. */
  predCoords: ArrayLike<number>;
  /** count * 2 center coordinates (x, y per element). */
  centers: ArrayLike<number>;
  /** Flat x, y pairs of every ground-truth ring back to back. */
  gtVertices: ArrayLike<number>;
  /** count + 1 fence posts into gtVertices, in vertices not floats. */
  gtOffsets: ArrayLike<number>;
  system?: typeof CARTESIAN | typeof POLAR;
  useL1?: boolean;
  useIou?: boolean;
  useOrder?: boolean;
  policy?: "paper" | "strict";
}

export interface BatchResult {
  /** 0 ok, 2 bad request, 3 element failed, 4 process trouble. */
  status: number;
  message: string;
  /** One loss per element; empty unless status is 0. */
  losses: Float64Array;
  /** One row of 2 * nVertices gradient values per element. */
  grads: Float64Array[];
}

function fail(status: number, message: string): BatchResult {
  return { status, message, losses: new Float64Array(0), grads: [] };
}

/** The JSON document the `polyloss batch-loss` subcommand reads. */
export function requestDoc(req: BatchRequest): Record<string, unknown> {
  return {
    count: req.count,
    n_vertices: req.nVertices,
    pred_coords: Array.from(req.predCoords),
    centers: Array.from(req.centers),
    gt_vertices: Array.from(req.gtVertices),
    gt_offsets: Array.from(req.gtOffsets),
    system: req.system ?? CARTESIAN,
    use_l1: req.useL1 ?? true,
    use_iou: req.useIou ?? true,
    use_order: req.useOrder ?? false,
    policy: req.policy ?? "paper",
  };
}

function parsePayload(stdout: string): BatchResult | null {
  let doc: unknown;
  try {
    doc = JSON.parse(stdout);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const rec = doc as Record<string, unknown>;
  const { status, message, losses, grads } = rec;
  if (typeof status !== "number" || typeof message !== "string") return null;
  if (!Array.isArray(losses) || !Array.isArray(grads)) return null;
  return {
    status,
    message,
    losses: Float64Array.from(losses as number[]),
    grads: (grads as number[][]).map((row) => Float64Array.from(row)),
  };
}

/**
 * Run one batch through the CLI. Domain and request errors come back in
 * `status`/`message`; this function never throws on them, and a broken or
 * missing CLI is reported as status CLI_FAILED rather than an exception.
 */
export async function batchPolyLoss(req: BatchRequest): Promise<BatchResult> {
  let dir: string | null = null;
  try {
    dir = await mkdtemp(join(tmpdir(), "polyloss-"));
    const reqPath = join(dir, "request.json");
    await writeFile(reqPath, JSON.stringify(requestDoc(req)), "utf-8");
    const out = await runCli(["batch-loss", reqPath]);
    if (out.failure !== undefined) {
      return fail(CLI_FAILED, `could not run CLI: ${out.failure}`);
    }
    if (out.code !== 0) {
      return fail(CLI_FAILED, `CLI exited ${out.code}: ${out.stderr.trim()}`);
    }
    const payload = parsePayload(out.stdout);
    if (payload === null) {
      return fail(CLI_FAILED, "CLI answered with unparseable output");
    }
    return payload;
  } finally {
    if (dir !== null) await rm(dir, { recursive: true, force: true });
  }
}
