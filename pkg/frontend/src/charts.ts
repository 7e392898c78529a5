// The three figure kinds drawn from the simulator's CSV exports: per-scheme
// balance histograms, baseline-stake vs winner-balance scatter over block
// index, and adversary probability sweep curves with their Monte-Carlo
// estimates. The renderer never modifies its inputs and plots nothing that
// is not backed by a CSV row.

import { CsvTable, numeric, parseCsv, requireColumns } from "./csv.js";
import { chartFrame, legend } from "./svg.js";

export type FigureKind = "histogram" | "stake-scatter" | "sweep-curve";

export interface FigureSpec {
  kind: FigureKind;
  input: string;
  output: string;
  title?: string;
  width?: number;
  height?: number;
}

const SCHEME_COLORS: Record<string, string> = {
  original: "#9aa0a6",
  epos: "#1a73e8",
  random: "#e8710a",
  priority: "#188038",
};

const PALETTE = ["#1a73e8", "#e8710a", "#188038", "#d93025", "#9334e6", "#12a4af"];

function colorFor(name: string, index: number): string {
  return SCHEME_COLORS[name] ?? PALETTE[index % PALETTE.length];
}

function groupBy(table: CsvTable, column: string): Map<string, Record<string, string>[]> {
  const groups = new Map<string, Record<string, string>[]>();
  for (const row of table.rows) {
    const key = row[column];
    const bucket = groups.get(key);
    if (bucket) bucket.push(row);
    else groups.set(key, [row]);
  }
  return groups;
}

function emptyFigure(width: number, height: number, title: string): string {
  const frame = chartFrame(width, height, [0, 1], [0, 1], title, "", "");
  frame.canvas.text((frame.plot.left + frame.plot.right) / 2,
                    (frame.plot.top + frame.plot.bottom) / 2,
                    "no data rows", 12);
  console.warn(`warning: ${title}: input has headers but no rows`);
  return frame.canvas.render();
}

export function renderHistogram(text: string, spec: FigureSpec): string {
  const table = parseCsv(text);
  requireColumns(table, ["scheme", "bin_lower", "bin_upper", "count"], spec.input);
  const width = spec.width ?? 640;
  const height = spec.height ?? 400;
  const title = spec.title ?? "Balance distribution by scheme";
  if (table.rows.length === 0) return emptyFigure(width, height, title);

  const xHi = Math.max(...table.rows.map(r => numeric(r, "bin_upper")));
  const yHi = Math.max(...table.rows.map(r => numeric(r, "count")));
  const frame = chartFrame(width, height, [0, xHi], [0, yHi * 1.05], title,
                           "balance (coins)", "peers in bin");
  const schemes = [...groupBy(table, "scheme").entries()];
  schemes.forEach(([name, rows], i) => {
    const color = colorFor(name, i);
    for (const row of rows) {
      const lo = numeric(row, "bin_lower");
      const hi = numeric(row, "bin_upper");
      const count = numeric(row, "count");
      const x0 = frame.x(lo);
      const x1 = frame.x(hi);
      const y = frame.y(count);
      frame.canvas.rect(x0, y, Math.max(x1 - x0, 0.5), frame.plot.bottom - y,
                        color, 0.45);
    }
  });
  legend(frame, schemes.map(([name], i) => [name, colorFor(name, i)]));
  return frame.canvas.render();
}

export function renderStakeScatter(text: string, spec: FigureSpec): string {
  const table = parseCsv(text);
  requireColumns(table, ["scheme", "block_index", "baseline_stake", "winner_balance"],
                 spec.input);
  const width = spec.width ?? 640;
  const height = spec.height ?? 400;
  const title = spec.title ?? "Baseline stake vs winner balance";
  if (table.rows.length === 0) return emptyFigure(width, height, title);

  const xHi = Math.max(...table.rows.map(r => numeric(r, "block_index")));
  const yHi = Math.max(...table.rows.map(r =>
    Math.max(numeric(r, "baseline_stake"), numeric(r, "winner_balance"))));
  const frame = chartFrame(width, height, [0, xHi], [0, yHi * 1.05], title,
                           "block index", "coins");
  const schemes = [...groupBy(table, "scheme").entries()];
  const entries: [string, string][] = [];
  schemes.forEach(([name, rows], i) => {
    const color = colorFor(name, i);
    const sorted = [...rows].sort(
      (a, b) => numeric(a, "block_index") - numeric(b, "block_index"));
    frame.canvas.polyline(
      sorted.map(r => [frame.x(numeric(r, "block_index")),
                       frame.y(numeric(r, "baseline_stake"))]),
      "#444", 1);
    for (const row of sorted) {
      frame.canvas.circle(frame.x(numeric(row, "block_index")),
                          frame.y(numeric(row, "winner_balance")), 2.4, color);
    }
    entries.push([`${name} winner balance`, color]);
  });
  entries.push(["baseline stake", "#444"]);
  legend(frame, entries);
  return frame.canvas.render();
}

export function renderSweepCurve(text: string, spec: FigureSpec): string {
  const table = parseCsv(text);
  requireColumns(table, ["n", "p", "m", "alpha", "closed_form", "empirical", "trials"],
                 spec.input);
  const width = spec.width ?? 640;
  const height = spec.height ?? 400;
  const title = spec.title ?? "Adversary success probability";
  if (table.rows.length === 0) return emptyFigure(width, height, title);

  // one panel at the deepest simulated network: probability vs identities
  const nMax = Math.max(...table.rows.map(r => numeric(r, "n")));
  const rows = table.rows.filter(r => numeric(r, "n") === nMax);
  const frame = chartFrame(width, height, [0, nMax], [0, 1.05], title,
                           `controlled identities p (n = ${nMax})`, "probability");
  const windows = [...groupBy({ columns: table.columns, rows }, "m").entries()];
  windows.forEach(([m, group], i) => {
    const color = PALETTE[i % PALETTE.length];
    const sorted = [...group].sort((a, b) => numeric(a, "p") - numeric(b, "p"));
    frame.canvas.polyline(
      sorted.map(r => [frame.x(numeric(r, "p")), frame.y(numeric(r, "closed_form"))]),
      color);
    for (const row of sorted) {
      frame.canvas.circle(frame.x(numeric(row, "p")),
                          frame.y(numeric(row, "empirical")), 2.4, color);
    }
  });
  legend(frame, windows.map(([m], i) =>
    [`window m = ${m} (line: formula, dots: sampled)`, PALETTE[i % PALETTE.length]]));
  return frame.canvas.render();
}

export function renderFigure(text: string, spec: FigureSpec): string {
  switch (spec.kind) {
    case "histogram": return renderHistogram(text, spec);
    case "stake-scatter": return renderStakeScatter(text, spec);
    case "sweep-curve": return renderSweepCurve(text, spec);
    default:
      throw new Error(`unknown figure kind '${(spec as FigureSpec).kind}'`);
  }
}
