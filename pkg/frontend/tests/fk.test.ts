// Client FK must agree with the service's kinematics to 0.01 mm. The
// fixture file is generated from the reference implementation by
// scripts/gen_fk_fixtures.py; regenerate it there, never edit by hand.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  degToRad,
  forwardKinematics,
  STATIONS,
  stationPoses,
} from "../src/fk.js";

interface FkCase {
  station: "index" | "thumb";
  mech: "lower" | "upper";
  theta1_deg: number;
  theta2_deg: number;
  x_mm: number;
  y_mm: number;
}

const here = dirname(fileURLToPath(import.meta.url));
const cases: FkCase[] = JSON.parse(
  readFileSync(join(here, "fixtures", "fk_cases.json"), "utf8"),
);

describe("forwardKinematics", () => {
  it("matches the service FK on every fixture case to 0.01 mm", () => {
    expect(cases.length).toBeGreaterThanOrEqual(160);
    let worst = 0;
    for (const c of cases) {
      const geom = STATIONS[c.station][c.mech];
      const pose = forwardKinematics(
        geom,
        degToRad(c.theta1_deg),
        degToRad(c.theta2_deg),
      );
      const err = Math.hypot(pose.p.x - c.x_mm, pose.p.y - c.y_mm);
      worst = Math.max(worst, err);
    }
    expect(worst).toBeLessThanOrEqual(0.01);
  });

  it("reproduces the symmetric 90/90 pose on the index lower mechanism", () => {
    const pose = forwardKinematics(
      STATIONS.index.lower,
      degToRad(90),
      degToRad(90),
    );
    // midline by symmetry; height from the two 15 mm distal links
    expect(pose.p.x).toBeCloseTo(6.25, 9);
    expect(pose.p.y).toBeCloseTo(9 + Math.sqrt(225 - 6.25 * 6.25), 9);
  });

  it("picks opposite elbow branches for upper and lower mechanisms", () => {
    const lo = forwardKinematics(STATIONS.index.lower, degToRad(90), degToRad(90));
    const up = forwardKinematics(STATIONS.index.upper, degToRad(-90), degToRad(-90));
    // lower bends up from y=0, upper bends down from y=31
    expect(lo.p.y).toBeGreaterThan(9);
    expect(up.p.y).toBeLessThan(31 - 9);
  });

  it("throws when the distal links cannot close the chain", () => {
    // elbows pushed apart: chord 30.2 mm > l3+l4 = 30 mm
    expect(() =>
      forwardKinematics(STATIONS.index.lower, degToRad(170), degToRad(10)),
    ).toThrow(/no assembly/);
  });

  it("unpacks joints_deg blocks as upper pair then lower pair", () => {
    const joints: [number, number, number, number] = [-90, -90, 90, 90];
    const poses = stationPoses(STATIONS.index, joints);
    const lo = forwardKinematics(STATIONS.index.lower, degToRad(90), degToRad(90));
    const up = forwardKinematics(STATIONS.index.upper, degToRad(-90), degToRad(-90));
    expect(poses.lower.p).toEqual(lo.p);
    expect(poses.upper.p).toEqual(up.p);
  });
});
