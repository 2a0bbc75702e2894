/**
 * Merge reversibility CSVs into a fixed-width error table.
 *
 * Layout follows the accuracy-test tables: blocks per norm, one row per
 * configuration (labelled by file name), columns for f, E1, E2 and B.
 * Values absent from a file appear as explicit gap markers.
 */

import * as fs from "fs";
import * as path from "path";

import { parseReversibility, ReversibilityErrors, SchemaError } from "./csv";

const UNKNOWNS = ["f", "E1", "E2", "B"];
const NORMS = ["L1", "L2"];
const GAP = "--";

interface Labelled {
  label: string;
  errors: ReversibilityErrors;
}

function formatValue(v: number | undefined): string {
  return v === undefined ? GAP : v.toExponential(3);
}

export function renderTable(csvPaths: string[]): string {
  if (csvPaths.length === 0) {
    throw new Error("need at least one reversibility file");
  }
  const inputs: Labelled[] = csvPaths.map((p) => ({
    label: path.basename(p).replace(/\.csv$/i, ""),
    errors: parseReversibility(fs.readFileSync(p, "utf-8")),
  }));
  for (const { label, errors } of inputs) {
    for (const u of errors.unknowns) {
      if (!UNKNOWNS.includes(u)) {
        throw new SchemaError(`${label}: unexpected unknown '${u}' (expected ${UNKNOWNS.join(", ")})`);
      }
    }
  }

  const labelWidth = Math.max(6, ...inputs.map(({ label }) => label.length));
  const colWidth = 11;
  const pad = (s: string, w: number) => s.padEnd(w);
  const lines: string[] = [];
  lines.push([pad("error", 6), pad("config", labelWidth),
    ...UNKNOWNS.map((u) => pad(u, colWidth))].join("  "));
  lines.push("-".repeat(6 + 2 + labelWidth + UNKNOWNS.length * (colWidth + 2)));
  for (const norm of NORMS) {
    inputs.forEach(({ label, errors }, idx) => {
      const cells = UNKNOWNS.map((u) => pad(formatValue(errors.values.get(`${u}/${norm}`)), colWidth));
      lines.push([pad(idx === 0 ? norm : "", 6), pad(label, labelWidth), ...cells].join("  "));
    });
  }
  return lines.join("\n") + "\n";
}

export function renderTableToFile(csvPaths: string[], outPath: string): void {
  const table = renderTable(csvPaths);
  fs.mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true });
  fs.writeFileSync(outPath, table);
}
