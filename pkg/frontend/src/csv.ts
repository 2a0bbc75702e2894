/**
 * Strict readers for the solver's CSV outputs.
 *
 * Both schemas are fixed by the solver; any deviation is reported with the
 * offending column or line rather than silently patched.
 */

export class SchemaError extends Error {}

export const TRAJECTORY_COLUMNS = [
  "t", "E1", "E2", "B", "K1", "K2", "mass", "iters", "residual",
] as const;

export interface Trajectory {
  /** column name -> values, all columns equally long */
  columns: Map<string, number[]>;
  rows: number;
}

export interface ReversibilityErrors {
  /** `${unknown}/${norm}` -> value */
  values: Map<string, number>;
  unknowns: string[];
  norms: string[];
}

function splitLines(text: string): string[] {
  return text
    .split(/\r?\n/)
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
}

export function parseTrajectory(text: string): Trajectory {
  const lines = splitLines(text);
  if (lines.length === 0) {
    throw new SchemaError("trajectory file is empty");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  for (const want of TRAJECTORY_COLUMNS) {
    if (!header.includes(want)) {
      throw new SchemaError(`trajectory file is missing column '${want}'`);
    }
  }
  const columns = new Map<string, number[]>(header.map((h) => [h, []]));
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== header.length) {
      throw new SchemaError(`trajectory line ${i + 1} has ${parts.length} fields, expected ${header.length}`);
    }
    parts.forEach((part, j) => {
      const value = Number(part);
      if (!Number.isFinite(value)) {
        throw new SchemaError(`trajectory line ${i + 1}, column '${header[j]}': not a number: ${part}`);
      }
      columns.get(header[j])!.push(value);
    });
  }
  if (lines.length === 1) {
    throw new SchemaError("trajectory file has a header but no rows");
  }
  return { columns, rows: lines.length - 1 };
}

export function parseReversibility(text: string): ReversibilityErrors {
  const lines = splitLines(text);
  if (lines.length === 0) {
    throw new SchemaError("reversibility file is empty");
  }
  if (lines[0].split(",").map((h) => h.trim()).join(",") !== "unknown,norm,value") {
    throw new SchemaError(`reversibility header must be 'unknown,norm,value', got '${lines[0]}'`);
  }
  const values = new Map<string, number>();
  const unknowns: string[] = [];
  const norms: string[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== 3) {
      throw new SchemaError(`reversibility line ${i + 1} has ${parts.length} fields, expected 3`);
    }
    const [unknown, norm, raw] = parts.map((p) => p.trim());
    const value = Number(raw);
    if (!Number.isFinite(value)) {
      throw new SchemaError(`reversibility line ${i + 1}: not a number: ${raw}`);
    }
    values.set(`${unknown}/${norm}`, value);
    if (!unknowns.includes(unknown)) unknowns.push(unknown);
    if (!norms.includes(norm)) norms.push(norm);
  }
  return { values, unknowns, norms };
}
