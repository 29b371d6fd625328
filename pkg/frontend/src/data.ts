/**
 * Readers for the exporter's file formats.
 *
 * Set files carry closed polylines (ellipse projections and convex hulls)
 * keyed by coordinate block and axis pair. History files carry the per-run
 * tracking errors and Lyapunov levels. Bounds files carry the certified
 * per-axis extents. Nothing here computes: these are the numbers the
 * certification pipeline already produced.
 */

import { columnIndices, numberAt, parseCsv } from "./csv.js";

export const BLOCKS = ["position", "velocity", "rotation"] as const;
export const PAIRS = ["xy", "xz", "yz"] as const;

export type Block = (typeof BLOCKS)[number];
export type Pair = (typeof PAIRS)[number];

export interface Point {
  u: number;
  v: number;
}

export type SetPolylines = Map<string, Point[]>;

const SET_COLUMNS = ["block", "pair", "idx", "u", "v"] as const;

export function polylineKey(block: string, pair: string): string {
  return `${block}/${pair}`;
}

/** Parse a set file into closed polylines keyed by "block/pair". */
export function readSetPolylines(text: string, source: string): SetPolylines {
  const table = parseCsv(text, source);
  const [bi, pi, ii, ui, vi] = columnIndices(table, SET_COLUMNS, source) as [
    number, number, number, number, number,
  ];
  const out: SetPolylines = new Map();
  let lastKey = "";
  let lastIdx = -1;
  for (const row of table.rows) {
    const key = polylineKey(row[bi] as string, row[pi] as string);
    const idx = numberAt(row, ii, source);
    if (key === lastKey && idx !== lastIdx + 1) {
      throw new Error(`${source}: polyline ${key} skips from ${lastIdx} to ${idx}`);
    }
    lastKey = key;
    lastIdx = idx;
    let pts = out.get(key);
    if (!pts) {
      pts = [];
      out.set(key, pts);
    }
    pts.push({ u: numberAt(row, ui, source), v: numberAt(row, vi, source) });
  }
  return out;
}

export interface History {
  /** sample times, common to all runs */
  time: number[];
  /** [run][sample][coordinate], nine log-error coordinates */
  zeta: number[][][];
  /** [run][sample], level of the certified quadratic */
  lyapZeta: number[][];
}

export const ZETA_COLUMNS = [
  "zp_x", "zp_y", "zp_z",
  "zv_x", "zv_y", "zv_z",
  "zr_x", "zr_y", "zr_z",
] as const;

export function readHistory(text: string, source: string): History {
  const table = parseCsv(text, source);
  const [runIdx, timeIdx, lyapIdx] = columnIndices(
    table, ["run", "time", "lyap_zeta"], source) as [number, number, number];
  const zetaIdx = columnIndices(table, ZETA_COLUMNS, source);

  const time: number[] = [];
  const zeta: number[][][] = [];
  const lyapZeta: number[][] = [];
  for (const row of table.rows) {
    const run = numberAt(row, runIdx, source);
    if (!Number.isInteger(run) || run < 0) {
      throw new Error(`${source}: bad run index "${row[runIdx] ?? ""}"`);
    }
    while (zeta.length <= run) {
      zeta.push([]);
      lyapZeta.push([]);
    }
    const t = numberAt(row, timeIdx, source);
    if (run === 0) {
      time.push(t);
    }
    (zeta[run] as number[][]).push(zetaIdx.map((c) => numberAt(row, c, source)));
    (lyapZeta[run] as number[]).push(numberAt(row, lyapIdx, source));
  }
  for (let r = 0; r < zeta.length; r++) {
    if ((zeta[r] as number[][]).length !== time.length) {
      throw new Error(
        `${source}: run ${r} has ${(zeta[r] as number[][]).length} samples, run 0 has ${time.length}`,
      );
    }
  }
  return { time, zeta, lyapZeta };
}

export interface CaseBounds {
  label: string;
  dAccel: number;
  /** certified extent of each of the nine log-error coordinates */
  algebraAxisBounds: number[];
  rateAxisBounds: number[];
}

export function readBounds(text: string, source: string): CaseBounds {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (err) {
    throw new Error(`${source}: not valid JSON (${(err as Error).message})`);
  }
  const obj = parsed as Record<string, unknown>;
  const algebra = obj["algebra_axis_bounds"];
  const rate = obj["rate_axis_bounds"];
  if (!Array.isArray(algebra) || algebra.length !== 9) {
    throw new Error(`${source}: missing or malformed "algebra_axis_bounds"`);
  }
  if (!Array.isArray(rate) || rate.length !== 3) {
    throw new Error(`${source}: missing or malformed "rate_axis_bounds"`);
  }
  return {
    label: String(obj["case"] ?? ""),
    dAccel: Number(obj["d_accel"] ?? NaN),
    algebraAxisBounds: algebra.map(Number),
    rateAxisBounds: rate.map(Number),
  };
}
