/**
 * Minimal CSV handling for the exported interchange files.
 *
 * The exporter writes plain comma-separated values with a header row and no
 * quoting, so a split-based parser is exact here. Schema problems are
 * reported by column name so a broken pipeline is diagnosable from the
 * message alone.
 */

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string, source: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error(`${source}: empty file`);
  }
  const header = (lines[0] as string).split(",");
  const rows: string[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const row = (lines[i] as string).split(",");
    if (row.length !== header.length) {
      throw new Error(
        `${source}: row ${i} has ${row.length} fields, header has ${header.length}`,
      );
    }
    rows.push(row);
  }
  return { header, rows };
}

/** Resolve required column names to indices, naming the first one missing. */
export function columnIndices(
  table: Table,
  names: readonly string[],
  source: string,
): number[] {
  return names.map((name) => {
    const idx = table.header.indexOf(name);
    if (idx < 0) {
      throw new Error(`${source}: missing column "${name}"`);
    }
    return idx;
  });
}

export function numberAt(row: string[], idx: number, source: string): number {
  const raw = row[idx];
  const value = Number(raw);
  if (raw === undefined || raw === "" || Number.isNaN(value)) {
    throw new Error(`${source}: not a number: "${raw ?? ""}"`);
  }
  return value;
}
