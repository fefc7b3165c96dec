import type { Matrix } from "./types.js";

/** Serialize numbers with full round-trip precision (shortest form that
 * parses back to the same double on any IEEE-754 consumer). */
function num(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`non-finite value ${x} in CSV data`);
  return String(x);
}

/** Points CSV with the x1,...,xd header expected by the CLI. */
export function pointsCsv(rows: Matrix): string {
  if (rows.length === 0) throw new Error("points CSV needs at least one row");
  const d = rows[0].length;
  const header = Array.from({ length: d }, (_, i) => `x${i + 1}`).join(",");
  const lines = rows.map((row) => {
    if (row.length !== d) throw new Error("ragged rows in points data");
    return row.map(num).join(",");
  });
  return `${header}\n${lines.join("\n")}\n`;
}

/** Causal CSV with the x1,...,xd,d,y header expected by the CLI. */
export function causalCsv(x: Matrix, d: number[], y: number[]): string {
  if (x.length !== d.length || x.length !== y.length) {
    throw new Error("x, d, y must have equal length");
  }
  if (x.length === 0) throw new Error("causal CSV needs at least one row");
  const dim = x[0].length;
  const header =
    Array.from({ length: dim }, (_, i) => `x${i + 1}`).join(",") + ",d,y";
  const lines = x.map((row, i) => {
    if (row.length !== dim) throw new Error("ragged rows in covariates");
    if (d[i] !== 0 && d[i] !== 1) throw new Error(`treatment must be 0/1, got ${d[i]}`);
    return [...row.map(num), String(d[i]), num(y[i])].join(",");
  });
  return `${header}\n${lines.join("\n")}\n`;
}
