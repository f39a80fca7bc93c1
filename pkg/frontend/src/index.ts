export {
  OK,
  BAD_REQUEST,
  ELEMENT_FAILED,
  CLI_FAILED,
  CARTESIAN,
  POLAR,
  batchPolyLoss,
  requestDoc,
} from "./batch.js";
export type { BatchRequest, BatchResult } from "./batch.js";
export { generatePolygons, parseInstanceDoc } from "./instances.js";
export type { GtgenResult, ImageEntry, Instance } from "./instances.js";
export { cliVersion } from "./version.js";
export { cliBinary, runCli } from "./runner.js";
export type { CliOutcome } from "./runner.js";
