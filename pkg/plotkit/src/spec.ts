import { SpecError } from "./errors.js";

/** What to draw: input CSVs, the curve columns, axis mode, output path. */
export interface PlotSpec {
  csvPaths: string[];
  columns: string[];
  labels: string[];
  logY: boolean;
  out: string;
  title: string;
  xColumn: string;
}

const KNOWN_KEYS = new Set([
  "csv",
  "columns",
  "labels",
  "logy",
  "out",
  "title",
  "x",
]);

/**
 * Parse a key=value spec file with optional section headers (sections are
 * ignored beyond syntax; the harness uses the same format).
 */
export function parseSpec(text: string): PlotSpec {
  const values = new Map<string, string>();
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trim();
    if (line === "" || line.startsWith("#") || line.startsWith(";")) continue;
    if (line.startsWith("[") && line.endsWith("]")) continue;
    const eq = line.indexOf("=");
    if (eq < 0) {
      throw new SpecError(`expected key=value, got "${line}"`);
    }
    const key = line.slice(0, eq).trim().toLowerCase();
    if (!KNOWN_KEYS.has(key)) {
      throw new SpecError(`unknown spec key "${key}"`);
    }
    values.set(key, line.slice(eq + 1).trim());
  }
  const csv = values.get("csv");
  const columns = values.get("columns");
  const out = values.get("out");
  if (!csv) throw new SpecError("spec is missing the csv key");
  if (!columns) throw new SpecError("spec is missing the columns key");
  if (!out) throw new SpecError("spec is missing the out key");

  const list = (s: string) =>
    s
      .split(",")
      .map((v) => v.trim())
      .filter((v) => v.length > 0);
  const cols = list(columns);
  if (cols.length === 0) {
    throw new SpecError("no columns selected");
  }
  const labels = values.has("labels") ? list(values.get("labels")!) : cols;
  if (labels.length !== cols.length) {
    throw new SpecError(
      `labels count ${labels.length} does not match columns count ${cols.length}`,
    );
  }
  const logyRaw = (values.get("logy") ?? "false").toLowerCase();
  if (!["true", "false", "0", "1", "yes", "no"].includes(logyRaw)) {
    throw new SpecError(`cannot parse logy value "${values.get("logy")}"`);
  }
  return {
    csvPaths: list(csv),
    columns: cols,
    labels,
    logY: logyRaw === "true" || logyRaw === "1" || logyRaw === "yes",
    out,
    title: values.get("title") ?? "",
    xColumn: values.get("x") ?? "step",
  };
}
