#!/usr/bin/env node
/** masec-plot --kind de_vs_mc|convergence|benchmark --in data.csv --out fig.svg
 *  [--manifest manifest.json] [--title "..."]
 *
 * Reads only the documented CSV schemas; never recomputes any quantity.
 * Exits non-zero with the offending column name on schema drift.
 */
import { readFileSync, writeFileSync } from "node:fs";
import { parseCsv, SchemaError } from "./csv.js";
import { buildFigure, FigureKind } from "./figure.js";
import { renderSvg } from "./svg.js";

const KINDS: FigureKind[] = ["de_vs_mc", "convergence", "benchmark"];

interface Args {
  kind: FigureKind;
  input: string;
  output: string;
  manifest?: string;
  title?: string;
}

export function parseArgs(argv: string[]): Args {
  const opts = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new Error(`bad argument pair near ${flag}`);
    }
    opts.set(flag.slice(2), value);
  }
  const kind = opts.get("kind");
  if (!kind || !KINDS.includes(kind as FigureKind)) {
    throw new Error(`--kind must be one of ${KINDS.join(", ")}`);
  }
  const input = opts.get("in");
  const output = opts.get("out");
  if (!input || !output) {
    throw new Error("--in and --out are required");
  }
  return {
    kind: kind as FigureKind,
    input,
    output,
    manifest: opts.get("manifest"),
    title: opts.get("title"),
  };
}

function defaultTitle(kind: FigureKind, manifestPath?: string): string {
  let suffix = "";
  if (manifestPath) {
    const manifest = JSON.parse(readFileSync(manifestPath, "utf8"));
    if (typeof manifest.command === "string") {
      suffix = ` (${manifest.command}, seeds ${manifest.seeds?.join(",") ?? "?"})`;
    }
  }
  const names: Record<FigureKind, string> = {
    de_vs_mc: "Ergodic eavesdropper rate: empirical vs theoretical",
    convergence: "Objective convergence",
    benchmark: "Ergodic secrecy rate by method",
  };
  return names[kind] + suffix;
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const table = parseCsv(readFileSync(args.input, "utf8"));
    const figure = buildFigure(args.kind, table);
    const title = args.title ?? defaultTitle(args.kind, args.manifest);
    writeFileSync(args.output, renderSvg(figure, title));
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 3;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(run(process.argv.slice(2)));
}
