#!/usr/bin/env node
/**
 * plots <figure-id> --csv PATH [--csv PATH ...] --out PATH
 *
 * Renders one of the four figure ids from trajectory.csv / sweep.csv
 * logs into a deterministic SVG.  Exit codes: 0 written, 1 schema or
 * render error, 2 usage error.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { SchemaError } from "./csv.js";
import { buildFigure, FIGURE_IDS, FigureId, FigureSpec } from "./figures.js";

function usage(): string {
  return `usage: plots <${FIGURE_IDS.join("|")}> --csv PATH [--csv PATH ...] --out PATH`;
}

export function parseArgs(argv: string[]): FigureSpec {
  const [figure, ...rest] = argv;
  if (!figure || !(FIGURE_IDS as readonly string[]).includes(figure)) {
    throw new Error(usage());
  }
  const csvPaths: string[] = [];
  let outPath = "";
  for (let i = 0; i < rest.length; i++) {
    if (rest[i] === "--csv") {
      csvPaths.push(rest[++i]);
    } else if (rest[i] === "--out") {
      outPath = rest[++i];
    } else {
      throw new Error(`unknown argument '${rest[i]}'\n${usage()}`);
    }
  }
  if (csvPaths.length === 0 || !outPath) {
    throw new Error(usage());
  }
  return { figure: figure as FigureId, csvPaths, outPath };
}

export function main(argv: string[]): number {
  let spec: FigureSpec;
  try {
    spec = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const texts = spec.csvPaths.map((p) => readFileSync(p, "utf-8"));
    const svg = buildFigure(spec, texts);
    writeFileSync(spec.outPath, svg);
    console.log(`wrote ${spec.outPath}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error((err as Error).message);
    }
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split(/[\\/]/).pop() as string);

if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
