#!/usr/bin/env node
/** CLI: render-table <csv...> -o <file> */

import { renderTable, renderTableToFile } from "./renderTable";

function main(argv: string[]): number {
  const files: string[] = [];
  let outPath: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "-o" || argv[i] === "--out") {
      outPath = argv[++i];
      if (outPath === undefined) {
        console.error("missing value after -o");
        return 2;
      }
    } else {
      files.push(argv[i]);
    }
  }
  if (files.length === 0) {
    console.error("usage: render-table <csv...> -o <file>");
    return 2;
  }
  try {
    if (outPath) {
      renderTableToFile(files, outPath);
      console.log(outPath);
    } else {
      process.stdout.write(renderTable(files));
    }
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

process.exitCode = main(process.argv.slice(2));
