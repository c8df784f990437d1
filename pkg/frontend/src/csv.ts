/** Strict CSV reader for the simulation outputs.
 *
 * The producing CLI writes plain comma-separated text without quoting, so the
 * grammar here is intentionally minimal; what matters is loud validation of
 * the documented column schema before anything is plotted.
 */

export interface Table {
  header: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("CSV is empty: nothing to plot");
  }
  const header = lines[0].split(",").map((c) => c.trim());
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",").map((c) => c.trim());
    if (cells.length !== header.length) {
      throw new SchemaError(
        `row ${i + 2} has ${cells.length} cells, expected ${header.length}`,
      );
    }
    return cells;
  });
  if (rows.length === 0) {
    throw new SchemaError("CSV has a header but no data rows");
  }
  return { header, rows };
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.header.includes(name)) {
      throw new SchemaError(
        `missing required column "${name}" (have: ${table.header.join(", ")})`,
      );
    }
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing required column "${name}"`);
  }
  return table.rows.map((row) => row[idx]);
}

export function numericColumn(table: Table, name: string): number[] {
  return column(table, name).map((cell, i) => {
    const value = Number(cell);
    if (!Number.isFinite(value)) {
      throw new SchemaError(`column "${name}" row ${i + 2}: not a number: ${cell}`);
    }
    return value;
  });
}
