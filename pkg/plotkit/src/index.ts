import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { dirname, resolve } from "node:path";

import { parseCsv, type CsvTable } from "./csv.js";
import { MissingColumnError, SpecError } from "./errors.js";
import { parseSpec, type PlotSpec } from "./spec.js";
import { renderSvg, type Curve } from "./svg.js";

export { parseCsv } from "./csv.js";
export { parseSpec, type PlotSpec } from "./spec.js";
export { renderSvg, type Curve } from "./svg.js";
export * from "./errors.js";

/** Pull the selected curves out of one or more parsed CSV tables. */
export function selectCurves(spec: PlotSpec, tables: CsvTable[]): Curve[] {
  const available = tables.flatMap((t) => [...t.columns.keys()]);
  const find = (name: string): number[] => {
    for (const table of tables) {
      const col = table.columns.get(name);
      if (col) return col;
    }
    throw new MissingColumnError(name, available);
  };
  return spec.columns.map((column, i) => {
    const y = find(column);
    // the x axis comes from whichever table holds this column
    const table = tables.find((t) => t.columns.has(column))!;
    const x = table.columns.get(spec.xColumn) ?? y.map((_, j) => j + 1);
    return { label: spec.labels[i], column, x, y };
  });
}

/** Render a spec file end to end; returns the output path written. */
export function render(specPath: string): string {
  const specDir = dirname(resolve(specPath));
  const spec = parseSpec(readFileSync(specPath, "utf-8"));
  if (spec.csvPaths.length === 0) {
    throw new SpecError("spec selects no csv files");
  }
  const tables = spec.csvPaths.map((p) => {
    const path = resolve(specDir, p);
    return parseCsv(readFileSync(path, "utf-8"), path);
  });
  const svg = renderSvg(selectCurves(spec, tables), spec);
  const outPath = resolve(specDir, spec.out);
  mkdirSync(dirname(outPath), { recursive: true });
  writeFileSync(outPath, svg);
  return outPath;
}
