/**
 * The two figure kinds: overlaid set projections (algebra ellipse next to
 * the group-level hull) and per-axis tracking histories against the
 * certified bound envelope.
 *
 * Everything drawn comes straight from the exported files; this module does
 * projection to pixels and nothing else numerical.
 */

import { readFileSync } from "node:fs";

import {
  BLOCKS,
  PAIRS,
  type Block,
  type CaseBounds,
  type History,
  type Pair,
  type Point,
  ZETA_COLUMNS,
  polylineKey,
  readBounds,
  readHistory,
  readSetPolylines,
} from "./data.js";
import {
  type DataExtent,
  type Viewport,
  Svg,
  drawFrame,
  makeViewport,
  padExtent,
  toPixel,
} from "./svg.js";

const CASE_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

const BLOCK_UNITS: Record<Block, string> = {
  position: "m",
  velocity: "m/s",
  rotation: "rad",
};

const COORD_LABELS = [
  "position x (m)", "position y (m)", "position z (m)",
  "velocity x (m/s)", "velocity y (m/s)", "velocity z (m/s)",
  "rotation x (rad)", "rotation y (rad)", "rotation z (rad)",
];

export interface CaseFile {
  label: string;
  path: string;
}

export interface SetsSpec {
  /** algebra set files, one per disturbance case */
  algebra: CaseFile[];
  /** group set files, matching labels */
  group: CaseFile[];
  block: Block;
  pair: Pair;
  width?: number;
  height?: number;
}

export interface SetsResult {
  svg: string;
  viewport: Viewport;
}

function checkBlockPair(block: string, pair: string): void {
  if (!(BLOCKS as readonly string[]).includes(block)) {
    throw new Error(`unknown block "${block}", expected one of ${BLOCKS.join(", ")}`);
  }
  if (!(PAIRS as readonly string[]).includes(pair)) {
    throw new Error(`unknown pair "${pair}", expected one of ${PAIRS.join(", ")}`);
  }
}

function loadCurve(file: CaseFile, block: Block, pair: Pair): Point[] {
  const sets = readSetPolylines(readFileSync(file.path, "utf8"), file.path);
  const curve = sets.get(polylineKey(block, pair));
  if (!curve || curve.length < 3) {
    throw new Error(`${file.path}: no polyline for ${polylineKey(block, pair)}`);
  }
  return curve;
}

/** Overlay the algebra projections and group hulls of all given cases. */
export function plotSets(spec: SetsSpec): SetsResult {
  checkBlockPair(spec.block, spec.pair);
  const width = spec.width ?? 480;
  const height = spec.height ?? 440;

  const families = [
    { name: "algebra", files: spec.algebra, dash: "" },
    { name: "group", files: spec.group, dash: 'stroke-dasharray="6 4" ' },
  ];
  const curves: Array<{ label: string; points: Point[]; style: string }> = [];
  let span = 0;
  families.forEach((family) => {
    family.files.forEach((file, i) => {
      const points = loadCurve(file, spec.block, spec.pair);
      for (const p of points) {
        span = Math.max(span, Math.abs(p.u), Math.abs(p.v));
      }
      const color = CASE_COLORS[i % CASE_COLORS.length] as string;
      curves.push({
        label: `${family.name} ${file.label}`,
        points,
        style: `fill="none" stroke="${color}" stroke-width="1.5" ${family.dash}`,
      });
    });
  });
  if (span === 0) {
    throw new Error("all set polylines are degenerate at the origin");
  }

  const extent = padExtent({ x0: -span, x1: span, y0: -span, y1: span }, 0.08);
  const area = { left: 58, top: 34, width: width - 78, height: height - 84 };
  const vp = makeViewport(extent, area);

  const svg = new Svg(width, height);
  const unit = BLOCK_UNITS[spec.block];
  const [ax, ay] = [spec.pair[0] as string, spec.pair[1] as string];
  drawFrame(svg, vp, `${spec.block} ${ax} (${unit})`, `${spec.block} ${ay} (${unit})`);

  curves.forEach((curve) => {
    svg.polyline(curve.points.map((p) => toPixel(vp, p.u, p.v)), curve.style, true);
  });

  const textStyle = 'font-family="Helvetica,Arial,sans-serif" font-size="10" fill="#333"';
  curves.forEach((curve, i) => {
    const x = area.left + 10 + Math.floor(i / 2) * 150;
    const y = area.top + 14 + (i % 2) * 14;
    const sample: Array<[number, number]> = [[x, y - 3], [x + 18, y - 3]];
    svg.polyline(sample, curve.style);
    svg.text(x + 24, y, curve.label, textStyle);
  });

  return { svg: svg.render(), viewport: vp };
}

export interface HistoryCase {
  label: string;
  historyPath: string;
  boundsPath: string;
}

export interface HistoriesSpec {
  cases: HistoryCase[];
  /** panel width per case; the grid is nine coordinate rows tall */
  panelWidth?: number;
  panelHeight?: number;
}

export interface HistoryPanel {
  coordinate: string;
  caseLabel: string;
  bound: number;
  viewport: Viewport;
}

export interface HistoriesResult {
  svg: string;
  panels: HistoryPanel[];
}

/** Per-axis error series with the certified bound drawn as an envelope. */
export function plotHistories(spec: HistoriesSpec): HistoriesResult {
  if (spec.cases.length === 0) {
    throw new Error("no cases given");
  }
  const panelW = spec.panelWidth ?? 300;
  const panelH = spec.panelHeight ?? 96;
  const marginL = 64;
  const marginT = 30;
  const gapX = 26;
  const gapY = 16;

  const loaded = spec.cases.map((c) => ({
    label: c.label,
    history: readHistory(readFileSync(c.historyPath, "utf8"), c.historyPath),
    bounds: readBounds(readFileSync(c.boundsPath, "utf8"), c.boundsPath),
  }));

  const width = marginL + loaded.length * (panelW + gapX) + 10;
  const height = marginT + 9 * (panelH + gapY) + 28;
  const svg = new Svg(width, height);
  const textStyle = 'font-family="Helvetica,Arial,sans-serif" font-size="10" fill="#333"';
  const titleStyle = 'font-family="Helvetica,Arial,sans-serif" font-size="11" fill="#111"';
  const panels: HistoryPanel[] = [];

  loaded.forEach((entry, col) => {
    const left = marginL + col * (panelW + gapX);
    svg.text(
      left + panelW / 2, marginT - 12,
      `disturbance ${entry.label}`, `${titleStyle} text-anchor="middle"`,
    );

    const { time, zeta } = entry.history;
    const t1 = time[time.length - 1] ?? 1;

    for (let coord = 0; coord < 9; coord++) {
      const bound = entry.bounds.algebraAxisBounds[coord] as number;
      let maxAbs = bound;
      for (const run of zeta) {
        for (const sample of run) {
          maxAbs = Math.max(maxAbs, Math.abs(sample[coord] as number));
        }
      }
      const extent: DataExtent = {
        x0: 0, x1: t1,
        y0: -maxAbs * 1.12, y1: maxAbs * 1.12,
      };
      const area = {
        left,
        top: marginT + coord * (panelH + gapY),
        width: panelW,
        height: panelH,
      };
      const vp = makeViewport(extent, area);
      panels.push({
        coordinate: ZETA_COLUMNS[coord] as string,
        caseLabel: entry.label,
        bound,
        viewport: vp,
      });

      const gridStyle = 'stroke="#eee" stroke-width="0.5"';
      const [, zeroY] = toPixel(vp, 0, 0);
      svg.line(area.left, zeroY, area.left + panelW, zeroY, gridStyle);
      svg.rect(area.left, area.top, panelW, panelH, 'fill="none" stroke="#333" stroke-width="1"');

      const boundStyle = 'stroke="#d62728" stroke-width="1" stroke-dasharray="5 3"';
      for (const sign of [1, -1]) {
        const [, by] = toPixel(vp, 0, sign * bound);
        svg.line(area.left, by, area.left + panelW, by, boundStyle);
      }

      entry.history.zeta.forEach((run) => {
        const pts = run.map((sample, k): [number, number] =>
          toPixel(vp, time[k] as number, sample[coord] as number));
        svg.polyline(pts, 'fill="none" stroke="#1f77b4" stroke-width="0.8" opacity="0.75"');
      });

      if (col === 0) {
        svg.raw(
          `<text x="${area.left - 40}" y="${area.top + panelH / 2}" ${textStyle} ` +
          `text-anchor="middle" transform="rotate(-90 ${area.left - 40} ${area.top + panelH / 2})">` +
          `${COORD_LABELS[coord] as string}</text>`,
        );
      }
      if (coord === 8) {
        svg.text(
          area.left + panelW / 2, area.top + panelH + 24,
          "time (s)", `${textStyle} text-anchor="middle"`,
        );
      }
    }
  });

  return { svg: svg.render(), panels };
}

export function assertHistoryWithinBounds(history: History, bounds: CaseBounds): boolean {
  for (const run of history.zeta) {
    for (const sample of run) {
      for (let coord = 0; coord < 9; coord++) {
        if (Math.abs(sample[coord] as number) > (bounds.algebraAxisBounds[coord] as number)) {
          return false;
        }
      }
    }
  }
  return true;
}
