/** Typed failures so callers can distinguish bad specs from bad data. */

export class PlotError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "PlotError";
  }
}

export class MissingColumnError extends PlotError {
  readonly column: string;

  constructor(column: string, available: string[]) {
    super(
      `column "${column}" not found in CSV header; ` +
        `available: ${available.join(", ")}`,
    );
    this.name = "MissingColumnError";
    this.column = column;
  }
}

export class EmptyCsvError extends PlotError {
  constructor(path: string) {
    super(`no data rows in ${path}`);
    this.name = "EmptyCsvError";
  }
}

export class SpecError extends PlotError {
  constructor(message: string) {
    super(message);
    this.name = "SpecError";
  }
}
