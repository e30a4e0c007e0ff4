// Scene geometry helpers: target wedge, force gauge scaling and the
// linkage segments the tactile panel draws.

import { describe, expect, it } from "vitest";

import { degToRad, forwardKinematics, STATIONS } from "../src/fk.js";
import {
  gaugeFraction,
  insideWedge,
  linkageSegments,
  TARGET_BAND_DEG,
  targetWedge,
} from "../src/scene.js";

describe("targetWedge", () => {
  it("spans +-10 deg around the target", () => {
    expect(TARGET_BAND_DEG).toBe(10);
    const w = targetWedge(45);
    expect(w.startRad).toBeCloseTo(degToRad(35), 12);
    expect(w.endRad).toBeCloseTo(degToRad(55), 12);
  });

  it("classifies the success window inclusively", () => {
    expect(insideWedge(35, 45)).toBe(true);
    expect(insideWedge(55, 45)).toBe(true);
    expect(insideWedge(34.9, 45)).toBe(false);
    expect(insideWedge(55.1, 45)).toBe(false);
  });
});

describe("gaugeFraction", () => {
  it("scales 0..10 N onto 0..1 and clamps", () => {
    expect(gaugeFraction(0)).toBe(0);
    expect(gaugeFraction(5)).toBeCloseTo(0.5, 12);
    expect(gaugeFraction(10)).toBe(1);
    expect(gaugeFraction(25)).toBe(1);
    expect(gaugeFraction(-1)).toBe(0);
  });
});

describe("linkageSegments", () => {
  it("emits four links per mechanism, chained base -> elbow -> tactor", () => {
    const joints: [number, number, number, number] = [-90, -90, 90, 90];
    const { segments, tactors } = linkageSegments("index", joints);
    expect(segments).toHaveLength(8);
    const lower = forwardKinematics(STATIONS.index.lower, degToRad(90), degToRad(90));
    expect(tactors.lower.p).toEqual(lower.p);
    // proximal links have length l1 = 9, distal links length l3
    for (const [i, [a, b]] of segments.entries()) {
      const len = Math.hypot(b.x - a.x, b.y - a.y);
      expect(len).toBeCloseTo(i % 2 === 0 ? 9 : 15, 9);
    }
    // every elbow segment ends at its mechanism's tactor point
    expect(segments[1][1]).toEqual(tactors.upper.p);
    expect(segments[3][1]).toEqual(tactors.upper.p);
    expect(segments[5][1]).toEqual(tactors.lower.p);
    expect(segments[7][1]).toEqual(tactors.lower.p);
  });

  it("uses the thumb's longer distal links", () => {
    const { segments } = linkageSegments("thumb", [-90, -90, 90, 90]);
    const distal = segments[1];
    const len = Math.hypot(
      distal[1].x - distal[0].x,
      distal[1].y - distal[0].y,
    );
    expect(len).toBeCloseTo(17.5, 9);
  });
});
