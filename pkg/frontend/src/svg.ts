/**
 * Deterministic SVG assembly. No DOM, no randomness, fixed number
 * formatting, so identical inputs give byte-identical files.
 */

export interface DataExtent {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

export interface PlotArea {
  left: number;
  top: number;
  width: number;
  height: number;
}

/** Affine map from data coordinates to pixels, y increasing upward. */
export interface Viewport {
  extent: DataExtent;
  area: PlotArea;
}

export function makeViewport(extent: DataExtent, area: PlotArea): Viewport {
  if (!(extent.x1 > extent.x0) || !(extent.y1 > extent.y0)) {
    throw new Error("viewport extent must have positive span");
  }
  return { extent, area };
}

export function toPixel(vp: Viewport, x: number, y: number): [number, number] {
  const { extent, area } = vp;
  const px = area.left + ((x - extent.x0) / (extent.x1 - extent.x0)) * area.width;
  const py = area.top + ((extent.y1 - y) / (extent.y1 - extent.y0)) * area.height;
  return [px, py];
}

export function toData(vp: Viewport, px: number, py: number): [number, number] {
  const { extent, area } = vp;
  const x = extent.x0 + ((px - area.left) / area.width) * (extent.x1 - extent.x0);
  const y = extent.y1 - ((py - area.top) / area.height) * (extent.y1 - extent.y0);
  return [x, y];
}

/** Pad an extent so drawn geometry clears the axes. */
export function padExtent(extent: DataExtent, frac: number): DataExtent {
  const dx = (extent.x1 - extent.x0) * frac;
  const dy = (extent.y1 - extent.y0) * frac;
  return { x0: extent.x0 - dx, x1: extent.x1 + dx, y0: extent.y0 - dy, y1: extent.y1 + dy };
}

/** Round tick positions covering [lo, hi] at a 1/2/5 step. */
export function niceTicks(lo: number, hi: number, target = 5): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const rawStep = (hi - lo) / target;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = mag;
  for (const mult of [1, 2, 5, 10]) {
    step = mult * mag;
    if (step >= rawStep) {
      break;
    }
  }
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

/** Pixel coordinates at fixed precision; data values at shortest-ish form. */
export const px = (v: number): string => {
  const r = Math.round(v * 100) / 100;
  return Object.is(r, -0) ? "0" : String(r);
};

export const label = (v: number): string => {
  if (v === 0) {
    return "0";
  }
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(1);
  }
  return String(Math.round(v * 1e6) / 1e6);
};

const escapeText = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  raw(markup: string): void {
    this.parts.push(markup);
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(
      `<line x1="${px(x1)}" y1="${px(y1)}" x2="${px(x2)}" y2="${px(y2)}" ${style}/>`,
    );
  }

  polyline(points: Array<[number, number]>, style: string, close = false): void {
    const d = points.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
    const tag = close ? "polygon" : "polyline";
    this.parts.push(`<${tag} points="${d}" ${style}/>`);
  }

  rect(x: number, y: number, w: number, h: number, style: string): void {
    this.parts.push(
      `<rect x="${px(x)}" y="${px(y)}" width="${px(w)}" height="${px(h)}" ${style}/>`,
    );
  }

  text(x: number, y: number, content: string, style: string): void {
    this.parts.push(
      `<text x="${px(x)}" y="${px(y)}" ${style}>${escapeText(content)}</text>`,
    );
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="white"/>`,
      ...this.parts,
      "</svg>",
    ].join("\n");
  }
}

/** Axis frame with ticks and labels around a viewport. */
export function drawFrame(
  svg: Svg,
  vp: Viewport,
  xLabel: string,
  yLabel: string,
): void {
  const { area, extent } = vp;
  const axisStyle = 'stroke="#333" stroke-width="1"';
  const gridStyle = 'stroke="#ddd" stroke-width="0.5"';
  const textStyle = 'font-family="Helvetica,Arial,sans-serif" font-size="10" fill="#333"';

  for (const t of niceTicks(extent.x0, extent.x1)) {
    const [x] = toPixel(vp, t, extent.y0);
    svg.line(x, area.top, x, area.top + area.height, gridStyle);
    svg.text(x, area.top + area.height + 14, label(t), `${textStyle} text-anchor="middle"`);
  }
  for (const t of niceTicks(extent.y0, extent.y1)) {
    const [, y] = toPixel(vp, extent.x0, t);
    svg.line(area.left, y, area.left + area.width, y, gridStyle);
    svg.text(area.left - 6, y + 3, label(t), `${textStyle} text-anchor="end"`);
  }
  svg.rect(area.left, area.top, area.width, area.height, `fill="none" ${axisStyle}`);
  svg.text(
    area.left + area.width / 2, area.top + area.height + 30,
    xLabel, `${textStyle} text-anchor="middle"`,
  );
  svg.raw(
    `<text x="${px(area.left - 38)}" y="${px(area.top + area.height / 2)}" ` +
    `font-family="Helvetica,Arial,sans-serif" font-size="10" fill="#333" text-anchor="middle" ` +
    `transform="rotate(-90 ${px(area.left - 38)} ${px(area.top + area.height / 2)})">` +
    `${escapeText(yLabel)}</text>`,
  );
}
