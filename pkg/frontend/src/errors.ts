/** Error raised when the service reports a toolkit error; `code` carries the
 * stable machine-readable identifier from the core taxonomy. */
export class MatchkitApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "MatchkitApiError";
    this.code = code;
    this.status = status;
  }
}
