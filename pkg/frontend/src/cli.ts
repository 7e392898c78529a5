// Batch figure renderer for epos-sim CSV output.
//
// Single figure:
//   node dist/cli.js --kind histogram --input out/histograms.csv --output fig.svg
// Many figures from a manifest (JSON array of specs):
//   node dist/cli.js --manifest figures.json

import { readFileSync, writeFileSync } from "fs";
import { FigureKind, FigureSpec, renderFigure } from "./charts.js";

const KINDS: FigureKind[] = ["histogram", "stake-scatter", "sweep-curve"];

function parseArgs(argv: string[]): FigureSpec[] {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near '${argv[i]}'`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  const manifest = flags.get("manifest");
  if (manifest) {
    const specs = JSON.parse(readFileSync(manifest, "utf-8")) as FigureSpec[];
    if (!Array.isArray(specs)) {
      throw new Error("manifest must be a JSON array of figure specs");
    }
    return specs.map(validateSpec);
  }
  return [validateSpec({
    kind: flags.get("kind") as FigureKind,
    input: flags.get("input") ?? "",
    output: flags.get("output") ?? "",
    title: flags.get("title"),
    width: flags.has("width") ? Number(flags.get("width")) : undefined,
    height: flags.has("height") ? Number(flags.get("height")) : undefined,
  })];
}

function validateSpec(spec: FigureSpec): FigureSpec {
  if (!KINDS.includes(spec.kind)) {
    throw new Error(`--kind must be one of ${KINDS.join(", ")}, got '${spec.kind}'`);
  }
  if (!spec.input || !spec.output) {
    throw new Error("--input and --output are required");
  }
  return spec;
}

export function main(argv: string[]): number {
  let specs: FigureSpec[];
  try {
    specs = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  for (const spec of specs) {
    try {
      const svg = renderFigure(readFileSync(spec.input, "utf-8"), spec);
      writeFileSync(spec.output, svg);
      console.log(`${spec.kind}: ${spec.input} -> ${spec.output}`);
    } catch (err) {
      console.error(`${spec.kind} '${spec.input}': ${(err as Error).message}`);
      return 1;
    }
  }
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
