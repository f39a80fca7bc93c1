import { spawn } from "node:child_process";

/** Raw outcome of one CLI invocation. `failure` is set when the process
 *  could not be started at all (binary missing, spawn error). */
export interface CliOutcome {
  code: number | null;
  stdout: string;
  stderr: string;
  failure?: string;
}

/** Binary to invoke; override with POLYLOSS_BIN for tests or virtualenvs. */
export function cliBinary(): string {
  return process.env.POLYLOSS_BIN ?? "polyloss";
}

export function runCli(args: string[]): Promise<CliOutcome> {
  return new Promise((resolve) => {
    const child = spawn(cliBinary(), args, { stdio: ["ignore", "pipe", "pipe"] });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => { stdout += chunk; });
    child.stderr.on("data", (chunk) => { stderr += chunk; });
    child.on("error", (err) => {
      resolve({ code: null, stdout, stderr, failure: String(err) });
    });
    child.on("close", (code) => {
      resolve({ code, stdout, stderr });
    });
  });
}
