/**
 * Energy figures from trajectory CSVs: one image for the electromagnetic
 * energies (B, E1, E2) and one for the kinetic components (K1, K2), with
 * the supplied cases side by side.
 */

import * as fs from "fs";
import * as path from "path";

import { parseTrajectory, Trajectory } from "./csv";
import { Panel, renderFigure } from "./svg";

const EM_COLORS: Record<string, string> = { B: "#c0392b", E1: "#2471a3", E2: "#1e8449" };
const KIN_COLORS: Record<string, string> = { K1: "#2471a3", K2: "#c0392b" };

function panelFrom(traj: Trajectory, title: string, colors: Record<string, string>): Panel {
  const t = traj.columns.get("t")!;
  return {
    title,
    series: Object.entries(colors).map(([name, color]) => ({
      label: name,
      color,
      t,
      y: traj.columns.get(name)!,
    })),
  };
}

export interface PlotResult {
  electromagnetic: string;
  kinetic: string;
}

/** Render both figures and return the written file paths. */
export function plotEnergies(csvPaths: string[], outDir: string): PlotResult {
  if (csvPaths.length < 1 || csvPaths.length > 2) {
    throw new Error(`expected one or two trajectory files, got ${csvPaths.length}`);
  }
  const trajectories = csvPaths.map((p) => ({
    name: path.basename(p).replace(/\.csv$/i, ""),
    traj: parseTrajectory(fs.readFileSync(p, "utf-8")),
  }));
  fs.mkdirSync(outDir, { recursive: true });

  const emPanels = trajectories.map(({ name, traj }) => panelFrom(traj, name, EM_COLORS));
  const kinPanels = trajectories.map(({ name, traj }) => panelFrom(traj, name, KIN_COLORS));
  const emPath = path.join(outDir, "energy_em.svg");
  const kinPath = path.join(outDir, "energy_kinetic.svg");
  fs.writeFileSync(emPath, renderFigure(emPanels));
  fs.writeFileSync(kinPath, renderFigure(kinPanels));
  return { electromagnetic: emPath, kinetic: kinPath };
}
