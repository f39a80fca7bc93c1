import { runCli } from "./runner.js";

/** Probe the installed CLI; resolves to its version string ("0.1.0"). */
export async function cliVersion(): Promise<string> {
  const out = await runCli(["--version"]);
  if (out.failure !== undefined || out.code !== 0) {
    throw new Error(out.failure ?? `version probe exited ${out.code}`);
  }
  const m = out.stdout.trim().match(/^polyloss (\S+)$/);
  if (m === null) throw new Error(`unexpected version output: ${out.stdout.trim()}`);
  return m[1];
}
