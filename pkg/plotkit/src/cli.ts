#!/usr/bin/env node
import { PlotError } from "./errors.js";
import { render } from "./index.js";

function main(argv: string[]): number {
  if (argv.length !== 1 || argv[0] === "--help" || argv[0] === "-h") {
    console.error("usage: iflplot <spec-file>");
    console.error("");
    console.error("spec file keys (key = value, sections optional):");
    console.error("  csv     = path(s) to harness CSV, comma separated");
    console.error("  columns = curve columns to draw, comma separated");
    console.error("  labels  = legend labels (defaults to column names)");
    console.error("  logy    = true|false");
    console.error("  out     = output .svg path");
    console.error("  title   = figure title");
    return argv.length === 1 ? 0 : 2;
  }
  try {
    const out = render(argv[0]);
    console.log(out);
    return 0;
  } catch (err) {
    if (err instanceof PlotError) {
      console.error(`${err.name}: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

process.exit(main(process.argv.slice(2)));
