export { MatchkitClient } from "./client.js";
export type { ClientOptions } from "./client.js";
export { MatchkitApiError } from "./errors.js";
export { causalCsv, pointsCsv } from "./csv.js";
export type {
  AteOptions,
  AteResult,
  CrossFitOptions,
  Envelope,
  Health,
  KlResult,
  Manifest,
  Matrix,
  MOptions,
  RatioAtResult,
  RatioResult,
} from "./types.js";
