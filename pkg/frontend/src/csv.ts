// Strict reader for the simulator's CSV exports. Those files are plain
// comma-separated with a header row and never quote fields, so a split-based
// parser is exact for them.

export interface CsvTable {
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string): CsvTable {
  const lines = text.split(/\r?\n/).filter(line => line.length > 0);
  if (lines.length === 0) {
    throw new Error("empty file: no header row");
  }
  const columns = lines[0].split(",").map(c => c.trim());
  const rows: Record<string, string>[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new Error(
        `row ${i + 1}: expected ${columns.length} fields, got ${parts.length}`);
    }
    const row: Record<string, string> = {};
    columns.forEach((col, k) => { row[col] = parts[k].trim(); });
    rows.push(row);
  }
  return { columns, rows };
}

export function requireColumns(table: CsvTable, required: string[], context: string): void {
  for (const name of required) {
    if (!table.columns.includes(name)) {
      throw new Error(`${context}: missing column '${name}'`);
    }
  }
}

export function numeric(row: Record<string, string>, column: string): number {
  const value = Number(row[column]);
  if (!Number.isFinite(value)) {
    throw new Error(`column '${column}': non-numeric value '${row[column]}'`);
  }
  return value;
}
