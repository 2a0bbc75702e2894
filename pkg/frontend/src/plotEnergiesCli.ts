#!/usr/bin/env node
/** CLI: plot-energies <case1.csv> [<case2.csv>] -o <dir> */

import { plotEnergies } from "./plotEnergies";

function main(argv: string[]): number {
  const files: string[] = [];
  let outDir = ".";
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "-o" || argv[i] === "--out") {
      outDir = argv[++i];
      if (outDir === undefined) {
        console.error("missing value after -o");
        return 2;
      }
    } else {
      files.push(argv[i]);
    }
  }
  if (files.length < 1 || files.length > 2) {
    console.error("usage: plot-energies <case1.csv> [<case2.csv>] -o <dir>");
    return 2;
  }
  try {
    const result = plotEnergies(files, outDir);
    console.log(result.electromagnetic);
    console.log(result.kinetic);
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

process.exitCode = main(process.argv.slice(2));
