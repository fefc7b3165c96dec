/** Result payload shapes shared by the HTTP service and the CLI. */

export interface Manifest {
  command: string;
  config: Record<string, unknown>;
  inputs: Record<string, string>;
  seed: number;
  version: string;
  wall_time_s: number;
}

export interface Envelope<R> {
  manifest: Manifest;
  result: R;
}

export interface RatioResult {
  eval_kind: string;
  m: number;
  n0: number;
  n1: number;
  values: number[];
  warning?: string;
}

export interface RatioAtResult {
  baseline: string;
  m: number;
  n0: number;
  n1: number;
  at_points: number[];
  at_sample: number[] | null;
  warning?: string;
}

export interface KlResult {
  value: number;
  m: number;
  n0: number;
  n1: number;
  warning?: string;
}

export interface GroupDiagnostics {
  max_weight: number;
  mean_weight: number;
}

export interface AteResult {
  method: string;
  tau_hat: number;
  sigma2_hat: number | null;
  ci_low: number | null;
  ci_high: number | null;
  m: number;
  k_folds: number | null;
  n: number;
  n0: number;
  n1: number;
  degree: number | null;
  level: number;
  diagnostics: {
    treated: GroupDiagnostics;
    control: GroupDiagnostics;
    [key: string]: unknown;
  };
  warning?: string;
}

export interface Health {
  status: string;
  version: string;
}

export type Matrix = number[][];

export interface MOptions {
  /** Explicit number of matches; wins over alpha. */
  m?: number;
  /** Constant feeding the M selection rule. */
  alpha?: number;
}

export interface AteOptions extends MOptions {
  degree?: number;
  level?: number;
}

export interface CrossFitOptions extends AteOptions {
  folds?: number;
  seed?: number;
}
