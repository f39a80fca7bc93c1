import { runCli } from "./runner.js";

export interface Instance {
  category: string;
  score: number;
  center: [number, number];
  vertices: [number, number][];
  depth?: number;
}

export interface ImageEntry {
  imageId: string;
  width?: number;
  height?: number;
  instances: Instance[];
}

export type GtgenResult =
  | { ok: true; images: ImageEntry[] }
  | { ok: false; code: number; message: string };

function asEntry(raw: Record<string, unknown>): ImageEntry {
  const entry: ImageEntry = {
    imageId: String(raw.image_id),
    instances: (raw.instances as Record<string, unknown>[]).map((inst) => {
      const out: Instance = {
        category: String(inst.category),
        score: Number(inst.score),
        center: inst.center as [number, number],
        vertices: inst.vertices as [number, number][],
      };
      if (inst.depth !== undefined) out.depth = Number(inst.depth);
      return out;
    }),
  };
  if (typeof raw.width === "number") entry.width = raw.width;
  if (typeof raw.height === "number") entry.height = raw.height;
  return entry;
}

export function parseInstanceDoc(text: string): ImageEntry[] {
  const doc = JSON.parse(text);
  if (!Array.isArray(doc)) throw new Error("instance document must be a JSON array");
  return doc.map((raw) => asEntry(raw as Record<string, unknown>));
}

/**
 * Trace ground-truth polygons from an instance-id mask (16-bit PGM with a
 * label sidecar). Failures are reported with the CLI's exit code: 2 for a
 * broken file, 3 for domain problems such as an all-background mask.
 */
export async function generatePolygons(
  maskPath: string,
  opts: { nVertices?: number } = {},
): Promise<GtgenResult> {
  const args = ["gtgen", maskPath];
  if (opts.nVertices !== undefined) args.push("--n-vertices", String(opts.nVertices));
  const out = await runCli(args);
  if (out.failure !== undefined) {
    return { ok: false, code: -1, message: `could not run CLI: ${out.failure}` };
  }
  if (out.code !== 0) {
    return { ok: false, code: out.code ?? -1, message: out.stderr.trim() };
  }
  try {
    return { ok: true, images: parseInstanceDoc(out.stdout) };
  } catch (err) {
    return { ok: false, code: -1, message: String(err) };
  }
}
