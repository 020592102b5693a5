import { EmptyCsvError, PlotError } from "./errors.js";

export interface CsvTable {
  /** column name -> values, in header order */
  columns: Map<string, number[]>;
  rows: number;
}

/** Parse a harness CSV: one header row, comma-separated numeric rows. */
export function parseCsv(text: string, path = "<csv>"): CsvTable {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new EmptyCsvError(path);
  }
  const header = lines[0].split(",").map((h) => h.trim());
  if (header.length === 0 || header[0] === "") {
    throw new PlotError(`malformed header in ${path}`);
  }
  const columns = new Map<string, number[]>(header.map((h) => [h, []]));
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new PlotError(
        `row with ${cells.length} cells does not match header of ` +
          `${header.length} in ${path}`,
      );
    }
    cells.forEach((cell, i) => {
      const value = Number(cell);
      if (!Number.isFinite(value)) {
        throw new PlotError(`non-numeric cell "${cell}" in ${path}`);
      }
      columns.get(header[i])!.push(value);
    });
  }
  const rows = lines.length - 1;
  if (rows === 0) {
    throw new EmptyCsvError(path);
  }
  return { columns, rows };
}
