// Minimal deterministic SVG plotting surface: linear scales, ticked axes,
// and shape helpers. Identical inputs always produce identical bytes.

export interface Scale {
  (value: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  return scale;
}

export function ticks(domain: [number, number], count = 6): number[] {
  const [lo, hi] = domain;
  if (lo === hi) return [lo];
  const rawStep = (hi - lo) / count;
  const magnitude = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const residual = rawStep / magnitude;
  const step = magnitude * (residual >= 5 ? 10 : residual >= 2 ? 5 : residual >= 1 ? 2 : 1);
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step / 1e6; v += step) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

const fmt = (value: number) => Number(value.toPrecision(6)).toString();

export class SvgCanvas {
  readonly parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {}

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
      `fill="${fill}" fill-opacity="${opacity}"/>`);
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
      `stroke="${stroke}" stroke-width="${width}"/>`);
  }

  polyline(points: [number, number][], stroke: string, width = 1.5): void {
    const path = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${path}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  text(x: number, y: number, content: string, size = 11, anchor = "middle",
       rotate?: number): void {
    const transform = rotate === undefined ? "" :
      ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"`;
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ` +
      `font-family="sans-serif" text-anchor="${anchor}"${transform}>` +
      `${escapeXml(content)}</text>`);
  }

  render(): string {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") + "\n</svg>\n";
  }
}

export interface Frame {
  canvas: SvgCanvas;
  x: Scale;
  y: Scale;
  plot: { left: number; right: number; top: number; bottom: number };
}

export function chartFrame(width: number, height: number, xDomain: [number, number],
                           yDomain: [number, number], title: string,
                           xLabel: string, yLabel: string): Frame {
  const plot = { left: 64, right: width - 16, top: 34, bottom: height - 44 };
  const canvas = new SvgCanvas(width, height);
  const x = linearScale(xDomain, [plot.left, plot.right]);
  const y = linearScale(yDomain, [plot.bottom, plot.top]);

  canvas.text(width / 2, 18, title, 13);
  canvas.line(plot.left, plot.bottom, plot.right, plot.bottom, "#333");
  canvas.line(plot.left, plot.bottom, plot.left, plot.top, "#333");
  for (const tick of ticks(xDomain)) {
    const px = x(tick);
    canvas.line(px, plot.bottom, px, plot.bottom + 4, "#333");
    canvas.text(px, plot.bottom + 16, fmt(tick), 10);
  }
  for (const tick of ticks(yDomain)) {
    const py = y(tick);
    canvas.line(plot.left - 4, py, plot.left, py, "#333");
    canvas.text(plot.left - 8, py + 3, fmt(tick), 10, "end");
  }
  canvas.text((plot.left + plot.right) / 2, height - 8, xLabel, 11);
  canvas.text(16, (plot.top + plot.bottom) / 2, yLabel, 11, "middle", -90);
  return { canvas, x, y, plot };
}

export function legend(frame: Frame, entries: [string, string][]): void {
  entries.forEach(([label, color], i) => {
    const x = frame.plot.left + 10;
    const y = frame.plot.top + 8 + i * 16;
    frame.canvas.rect(x, y - 8, 10, 10, color);
    frame.canvas.text(x + 16, y, label, 10, "start");
  });
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
