// Stylized 2D side view: pivoting cylinder with the target wedge, a
// grip/fixture force gauge (GF conditions), and the live linkage panel
// (TF conditions). Pure geometry helpers are exported for tests; the
// draw calls are thin wrappers over them.

import { STATIONS, stationPoses, LinkagePose } from "./fk.js";
import { StateMessage } from "./protocol.js";
import { ViewModel } from "./view.js";

export const TARGET_BAND_DEG = 10; // success window, +-10 deg

export interface Wedge {
  startRad: number;
  endRad: number;
}

/** Target wedge around targetDeg; screen-space radians (y down). */
export function targetWedge(targetDeg: number): Wedge {
  return {
    startRad: ((targetDeg - TARGET_BAND_DEG) * Math.PI) / 180,
    endRad: ((targetDeg + TARGET_BAND_DEG) * Math.PI) / 180,
  };
}

export function insideWedge(angleDeg: number, targetDeg: number): boolean {
  return Math.abs(angleDeg - targetDeg) <= TARGET_BAND_DEG;
}

/** Grip force bar fill, clamped to the 10 N display range. */
export function gaugeFraction(forceN: number, fullScaleN = 10): number {
  return Math.min(1, Math.max(0, forceN / fullScaleN));
}

export type Segment = [
  { x: number; y: number },
  { x: number; y: number },
];

/** Drawable link segments for one station from its joints_deg block. */
export function linkageSegments(
  stationName: "index" | "thumb",
  joints: [number, number, number, number],
): { segments: Segment[]; tactors: { upper: LinkagePose; lower: LinkagePose } } {
  const st = STATIONS[stationName];
  const poses = stationPoses(st, joints);
  const segs: Segment[] = [];
  for (const [geom, pose] of [
    [st.upper, poses.upper],
    [st.lower, poses.lower],
  ] as const) {
    segs.push([geom.o1, pose.a1], [pose.a1, pose.p]);
    segs.push([geom.o2, pose.a2], [pose.a2, pose.p]);
  }
  return { segments: segs, tactors: poses };
}

// -- canvas drawing ----------------------------------------------------

const SCENE = { cx: 230, cy: 200, r: 150 };

function drawScene(ctx: CanvasRenderingContext2D, vm: ViewModel, nowMs: number) {
  const s = vm.state();
  const { cx, cy, r } = SCENE;
  const wedge = targetWedge(s.target_angle_deg);

  ctx.fillStyle = "rgba(80, 180, 90, 0.25)";
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.arc(cx, cy, r, wedge.startRad, wedge.endRad);
  ctx.closePath();
  ctx.fill();

  ctx.strokeStyle = "#888";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  const tr = (s.target_angle_deg * Math.PI) / 180;
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + r * Math.cos(tr), cy + r * Math.sin(tr));
  ctx.stroke();
  ctx.setLineDash([]);

  // gripper jaws at the pivot, gap proportional to aperture
  const gap = 600 * s.aperture_m;
  ctx.fillStyle = "#555";
  ctx.fillRect(cx - 26, cy - 10 - gap / 2, 52, 8);
  ctx.fillRect(cx - 26, cy + 2 + gap / 2, 52, 8);

  // the cylinder, drawn at the interpolated angle
  const ang = (vm.objectAngleDeg(nowMs) * Math.PI) / 180;
  ctx.save();
  ctx.translate(cx, cy);
  ctx.rotate(ang);
  ctx.fillStyle = insideWedge(vm.objectAngleDeg(nowMs), s.target_angle_deg)
    ? "#2e8b3a"
    : "#b03030";
  ctx.fillRect(-40, -7.5, 100, 15); // grasp 40 mm from the center, 10x scale
  ctx.restore();

  ctx.fillStyle = "#222";
  ctx.font = "14px system-ui, sans-serif";
  ctx.fillText(
    `${vm.objectAngleDeg(nowMs).toFixed(1)}° / ${s.target_angle_deg.toFixed(0)}°`,
    cx - 30,
    cy - r - 10,
  );
}

function drawGauge(ctx: CanvasRenderingContext2D, s: StateMessage) {
  const x = 480;
  const y = 60;
  const h = 150;
  ctx.strokeStyle = "#444";
  ctx.strokeRect(x, y, 26, h);
  const fill = gaugeFraction(s.grip_force_n);
  ctx.fillStyle = "#3a6ea5";
  ctx.fillRect(x + 1, y + h - fill * h + 1, 24, fill * h - 2);
  ctx.fillStyle = "#222";
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(`${s.grip_force_n.toFixed(2)} N`, x - 4, y + h + 16);
  ctx.fillText("grip", x + 2, y - 8);
  const fx = gaugeFraction(Math.abs(s.fixture_force_n), 5);
  ctx.strokeRect(x + 44, y, 10, h);
  ctx.fillStyle = s.fixture_force_n < 0 ? "#a5573a" : "#999";
  ctx.fillRect(x + 45, y + h - fx * h + 1, 8, fx * h - 2);
  ctx.fillText("fixture", x + 36, y - 8);
}

function drawLinkagePanel(ctx: CanvasRenderingContext2D, s: StateMessage) {
  const origin = { index: { x: 580, y: 250 }, thumb: { x: 680, y: 250 } };
  const scale = 2.4; // mm -> px, y flipped
  ctx.font = "12px system-ui, sans-serif";
  for (const name of ["index", "thumb"] as const) {
    const base = name === "index" ? 0 : 4;
    const joints = s.joints_deg.slice(base, base + 4) as [
      number, number, number, number,
    ];
    const { segments, tactors } = linkageSegments(name, joints);
    const ox = origin[name].x;
    const oy = origin[name].y;
    ctx.strokeStyle = "#3a6ea5";
    ctx.lineWidth = 2;
    for (const [a, b] of segments) {
      ctx.beginPath();
      ctx.moveTo(ox + scale * a.x, oy - scale * a.y);
      ctx.lineTo(ox + scale * b.x, oy - scale * b.y);
      ctx.stroke();
    }
    ctx.fillStyle = "#b03030";
    for (const pose of [tactors.upper, tactors.lower]) {
      ctx.beginPath();
      ctx.arc(ox + scale * pose.p.x, oy - scale * pose.p.y, 4, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.fillStyle = "#222";
    ctx.fillText(name, ox + 4, oy + 24);
  }
  ctx.lineWidth = 1;
}

/** One full frame. Panels follow the active condition's flags. */
export function renderScene(
  ctx: CanvasRenderingContext2D,
  vm: ViewModel,
  nowMs: number,
): void {
  ctx.clearRect(0, 0, 780, 420);
  if (!vm.hasState()) {
    ctx.fillStyle = "#222";
    ctx.font = "16px system-ui, sans-serif";
    ctx.fillText("connecting…", 330, 200);
    return;
  }
  const s = vm.state();
  drawScene(ctx, vm, nowMs);
  const flags = vm.flags();
  if (flags.graspForce) drawGauge(ctx, s);
  if (flags.tactile) drawLinkagePanel(ctx, s);

  const banner = vm.banner();
  ctx.fillStyle = "#222";
  ctx.font = "14px system-ui, sans-serif";
  const line =
    banner.status === "running"
      ? `${banner.caseLabel}  ${banner.elapsedS.toFixed(1)} s`
      : banner.status === "done"
        ? `${banner.caseLabel}  done`
        : "idle — press Start";
  ctx.fillText(line, 20, 26);
  if (vm.connectionLost(nowMs)) {
    ctx.fillStyle = "#b03030";
    ctx.fillRect(0, 40, 780, 28);
    ctx.fillStyle = "#fff";
    ctx.fillText("connection lost — no snapshot for over 500 ms", 20, 59);
  }
}
