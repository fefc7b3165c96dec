import { MatchkitApiError } from "./errors.js";
import type {
  AteOptions,
  AteResult,
  CrossFitOptions,
  Envelope,
  Health,
  KlResult,
  Matrix,
  MOptions,
  RatioAtResult,
  RatioResult,
} from "./types.js";

export interface ClientOptions {
  baseUrl: string;
  /** Override for environments without a global fetch. */
  fetchImpl?: typeof fetch;
}

/** Client for the matchkit HTTP service.
 *
 * Numbers round-trip exactly: the service emits 17-significant-digit JSON,
 * so the doubles produced by JSON.parse here equal the service's doubles
 * bit-for-bit (and therefore the CLI's, which shares the same writer). */
export class MatchkitClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  private async post<R>(path: string, body: unknown): Promise<R> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const text = await response.text();
    if (!response.ok) {
      let code = "error";
      let message = text;
      try {
        const parsed = JSON.parse(text);
        if (parsed?.error) {
          code = parsed.error.code ?? code;
          message = parsed.error.message ?? message;
        }
      } catch {
        // non-JSON error body; keep raw text
      }
      throw new MatchkitApiError(code, message, response.status);
    }
    return JSON.parse(text) as R;
  }

  async health(): Promise<Health> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/health`);
    if (!response.ok) {
      throw new MatchkitApiError("error", await response.text(), response.status);
    }
    return (await response.json()) as Health;
  }

  /** Density ratio at the sample points of x. */
  ratioAtSample(x: Matrix, z: Matrix, options: MOptions = {}) {
    return this.post<Envelope<RatioResult>>("/v1/ratio", {
      x,
      z,
      m: options.m ?? null,
      alpha: options.alpha ?? null,
    });
  }

  /** Density ratio at new points (baseline: matching | two-step | noshad). */
  ratioAtPoints(
    x: Matrix,
    z: Matrix,
    points: Matrix,
    options: MOptions & { baseline?: string } = {},
  ) {
    return this.post<Envelope<RatioAtResult>>("/v1/ratio-at", {
      x,
      z,
      points,
      baseline: options.baseline ?? "matching",
      m: options.m ?? null,
      alpha: options.alpha ?? null,
    });
  }

  /** Plug-in KL divergence estimate (nats). */
  klEstimate(x: Matrix, z: Matrix, options: MOptions = {}) {
    return this.post<Envelope<KlResult>>("/v1/kl", {
      x,
      z,
      m: options.m ?? null,
      alpha: options.alpha ?? null,
    });
  }

  private ate(
    x: Matrix,
    d: number[],
    y: number[],
    method: string,
    options: CrossFitOptions,
  ) {
    return this.post<Envelope<AteResult>>("/v1/ate", {
      x,
      d,
      y,
      method,
      m: options.m ?? null,
      alpha: options.alpha ?? null,
      degree: options.degree ?? null,
      folds: options.folds ?? 2,
      seed: options.seed ?? 0,
      level: options.level ?? 0.95,
    });
  }

  /** Matching estimator of the average treatment effect (no interval). */
  ateMatching(x: Matrix, d: number[], y: number[], options: MOptions = {}) {
    return this.ate(x, d, y, "matching", options);
  }

  /** Bias-corrected matching estimator with variance and interval. */
  ateBiasCorrected(x: Matrix, d: number[], y: number[], options: AteOptions = {}) {
    return this.ate(x, d, y, "bc", options);
  }

  /** K-fold cross-fitted bias-corrected estimator. */
  ateCrossFit(x: Matrix, d: number[], y: number[], options: CrossFitOptions = {}) {
    return this.ate(x, d, y, "crossfit", options);
  }
}
