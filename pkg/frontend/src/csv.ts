/**
 * Minimal typed CSV access for the trajectory/sweep logs.
 *
 * The controller writes plain comma-separated files with a fixed header
 * row and no quoting, so a hand-rolled parser keeps this package free of
 * runtime dependencies.
 */

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface Table {
  /** Source path, used in error messages and legends. */
  path: string;
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string, path: string): Table {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) {
    throw new SchemaError(`${path}: no data rows`);
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { path, columns, rows };
}

/** Numeric column accessor; throws a SchemaError naming a missing column. */
export function numericColumn(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`${table.path}: missing column '${name}'`);
  }
  return table.rows.map((r) => {
    const v = Number(r[idx]);
    return Number.isFinite(v) ? v : NaN;
  });
}

/** All column names matching a prefix+index pattern, in index order. */
export function indexedColumns(table: Table, prefix: string): string[] {
  const re = new RegExp(`^${prefix}(\\d+)$`);
  const hits: Array<[number, string]> = [];
  for (const c of table.columns) {
    const m = re.exec(c);
    if (m) {
      hits.push([Number(m[1]), c]);
    }
  }
  hits.sort((a, b) => a[0] - b[0]);
  return hits.map(([, c]) => c);
}

export function requireIndexed(table: Table, prefix: string): string[] {
  const cols = indexedColumns(table, prefix);
  if (cols.length === 0) {
    throw new SchemaError(`${table.path}: missing column '${prefix}0'`);
  }
  return cols;
}
