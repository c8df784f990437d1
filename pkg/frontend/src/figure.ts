/** Turns the documented CSV schemas into plottable series.
 *
 * Three figure kinds mirror the simulation studies:
 *   de_vs_mc     - theoretical (deterministic equivalent) vs empirical
 *                  (Monte Carlo) rate over a sweep
 *   convergence  - per-iteration objective traces, one series per run key
 *   benchmark    - mean clamped secrecy rate per method over a sweep
 */
import { Table, SchemaError, column, numericColumn, requireColumns } from "./csv.js";

export type FigureKind = "de_vs_mc" | "convergence" | "benchmark";

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface FigureData {
  series: Series[];
  xLabel: string;
  yLabel: string;
}

function meanBy(keys: number[], labels: string[], values: number[]) {
  const acc = new Map<string, Map<number, { sum: number; n: number }>>();
  for (let i = 0; i < keys.length; i++) {
    const perLabel = acc.get(labels[i]) ?? new Map();
    const cell = perLabel.get(keys[i]) ?? { sum: 0, n: 0 };
    cell.sum += values[i];
    cell.n += 1;
    perLabel.set(keys[i], cell);
    acc.set(labels[i], perLabel);
  }
  return acc;
}

function toSeries(acc: Map<string, Map<number, { sum: number; n: number }>>): Series[] {
  return [...acc.entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([label, cells]) => {
      const xs = [...cells.keys()].sort((a, b) => a - b);
      return {
        label,
        x: xs,
        y: xs.map((x) => {
          const cell = cells.get(x)!;
          return cell.sum / cell.n;
        }),
      };
    });
}

export function deVsMcFigure(table: Table): FigureData {
  requireColumns(table, ["sweep_axis", "sweep_value", "seed", "de_nats", "mc_mean_nats"]);
  const sweep = numericColumn(table, "sweep_value");
  const de = numericColumn(table, "de_nats");
  const mc = numericColumn(table, "mc_mean_nats");
  const axis = column(table, "sweep_axis")[0];
  const series = toSeries(
    meanBy(
      sweep.concat(sweep),
      new Array(sweep.length).fill("Theoretical").concat(new Array(sweep.length).fill("Empirical")),
      de.concat(mc),
    ),
  );
  // legend order follows the simulation-study convention
  series.sort((a, b) => (a.label === "Empirical" ? -1 : 1) - (b.label === "Empirical" ? -1 : 1));
  return { series, xLabel: axis, yLabel: "rate (nats)" };
}

const CONVERGENCE_KEYS = ["n_tx", "alpha", "antenna_index"];
const CONVERGENCE_ITER = ["iter", "outer_iter"];
const CONVERGENCE_VALUE = ["objective_nats"];

export function convergenceFigure(table: Table): FigureData {
  const iterCol = CONVERGENCE_ITER.find((c) => table.header.includes(c));
  if (!iterCol) {
    throw new SchemaError(
      `missing required column "${CONVERGENCE_ITER.join('" or "')}"`,
    );
  }
  requireColumns(table, CONVERGENCE_VALUE);
  const iters = numericColumn(table, iterCol);
  const values = numericColumn(table, "objective_nats");
  const keyCol = CONVERGENCE_KEYS.find((c) => table.header.includes(c));
  const labels = keyCol
    ? column(table, keyCol).map((v) => `${keyCol}=${v}`)
    : new Array(iters.length).fill("objective");
  const acc = meanBy(iters, labels, values);
  return { series: toSeries(acc), xLabel: "iteration", yLabel: "objective (nats)" };
}

export function benchmarkFigure(table: Table): FigureData {
  requireColumns(table, ["sweep_axis", "sweep_value", "method", "seed", "esr_bits"]);
  const sweep = numericColumn(table, "sweep_value");
  const methods = column(table, "method");
  const esr = numericColumn(table, "esr_bits");
  const axis = column(table, "sweep_axis")[0];
  return {
    series: toSeries(meanBy(sweep, methods, esr)),
    xLabel: axis,
    yLabel: "ESR (bits/s/Hz)",
  };
}

export function buildFigure(kind: FigureKind, table: Table): FigureData {
  switch (kind) {
    case "de_vs_mc":
      return deVsMcFigure(table);
    case "convergence":
      return convergenceFigure(table);
    case "benchmark":
      return benchmarkFigure(table);
    default:
      throw new SchemaError(`unknown figure kind: ${kind as string}`);
  }
}
