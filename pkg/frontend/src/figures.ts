/**
 * The four figure builders over the controller's CSV schemas.
 *
 * trajectories      one subplot row per run: states and inputs vs t
 * averages          transient average (and margin) vs swept value
 * theta_series      one labeled series per storage coefficient
 * stability_compare overlay of |x - 0|_inf for two (or more) runs
 */

import { basename } from "node:path";

import { numericColumn, parseCsv, requireIndexed, SchemaError, Table } from "./csv.js";
import { color, Panel, renderFigure, Series } from "./svg.js";

export const FIGURE_IDS = [
  "trajectories",
  "averages",
  "theta_series",
  "stability_compare",
] as const;

export type FigureId = (typeof FIGURE_IDS)[number];

export interface FigureSpec {
  figure: FigureId;
  csvPaths: string[];
  outPath: string;
}

function runLabel(table: Table): string {
  const b = basename(table.path);
  const dir = table.path.split(/[\\/]/).slice(-2, -1)[0];
  return dir && b === "trajectory.csv" ? dir : b;
}

function trajectoryPanels(tables: Table[]): Panel[] {
  return tables.map((t) => {
    const time = numericColumn(t, "t");
    const series: Series[] = [];
    requireIndexed(t, "x").forEach((c, i) => {
      series.push({ label: c, x: time, y: numericColumn(t, c), color: color(i) });
    });
    const nx = series.length;
    requireIndexed(t, "u").forEach((c, i) => {
      series.push({
        label: c,
        x: time,
        y: numericColumn(t, c),
        color: color(nx + i),
        dash: "5,3",
      });
    });
    return {
      title: `closed-loop trajectories - ${runLabel(t)}`,
      xLabel: "t",
      yLabel: "state / input",
      series,
    };
  });
}

function averagesPanels(tables: Table[]): Panel[] {
  return tables.map((t) => {
    const value = numericColumn(t, "value");
    const avg = numericColumn(t, "transient_average");
    const margin = numericColumn(t, "theorem2_margin");
    return {
      title: `transient average vs swept value - ${runLabel(t)}`,
      xLabel: "parameter value",
      yLabel: "transient average",
      series: [
        { label: "transient_average", x: value, y: avg, color: color(0), markers: true },
        { label: "theorem2_margin", x: value, y: margin, color: color(1), markers: true, dash: "5,3" },
      ],
    };
  });
}

function thetaPanels(tables: Table[]): Panel[] {
  return tables.map((t) => {
    const time = numericColumn(t, "t");
    const cols = requireIndexed(t, "theta_");
    const series = cols.map((c, i) => ({
      label: c,
      x: time,
      y: numericColumn(t, c),
      color: color(i),
    }));
    return {
      title: `storage coefficients - ${runLabel(t)}`,
      xLabel: "t",
      yLabel: "theta",
      series,
    };
  });
}

function stabilityPanel(tables: Table[]): Panel[] {
  const series = tables.map((t, i) => {
    const time = numericColumn(t, "t");
    const states = requireIndexed(t, "x").map((c) => numericColumn(t, c));
    const dev = time.map((_, k) =>
      Math.max(...states.map((col) => Math.abs(col[k]))),
    );
    return { label: runLabel(t), x: time, y: dev, color: color(i) };
  });
  return [
    {
      title: "deviation from the optimal equilibrium",
      xLabel: "t",
      yLabel: "|x|_inf",
      series,
    },
  ];
}

export function buildFigure(spec: FigureSpec, texts: string[]): string {
  const tables = texts.map((text, i) => parseCsv(text, spec.csvPaths[i]));
  switch (spec.figure) {
    case "trajectories":
      return renderFigure(trajectoryPanels(tables));
    case "averages":
      return renderFigure(averagesPanels(tables));
    case "theta_series":
      return renderFigure(thetaPanels(tables));
    case "stability_compare":
      if (tables.length < 2) {
        throw new SchemaError("stability_compare needs at least two runs");
      }
      return renderFigure(stabilityPanel(tables));
    default:
      throw new SchemaError(`unknown figure id '${spec.figure as string}'`);
  }
}
