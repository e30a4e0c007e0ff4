// Client-side five-bar forward kinematics, used only to draw the
// linkage from the joint angles the service streams. Geometry mirrors
// the rig's two stations; the cross-check test holds this to 0.01 mm
// of the service's own FK.

export interface Point {
  x: number;
  y: number;
}

export interface FiveBarGeometry {
  o1: Point;
  o2: Point;
  l1: number;
  l2: number;
  l3: number;
  l4: number;
  elbow: 1 | -1;
}

export interface StationGeometry {
  lower: FiveBarGeometry;
  upper: FiveBarGeometry;
}

function fiveBar(
  baseY: number,
  distal: number,
  elbow: 1 | -1,
): FiveBarGeometry {
  return {
    o1: { x: 0, y: baseY },
    o2: { x: 12.5, y: baseY },
    l1: 9,
    l2: 9,
    l3: distal,
    l4: distal,
    elbow,
  };
}

export const STATIONS: Record<string, StationGeometry> = {
  index: { lower: fiveBar(0, 15, 1), upper: fiveBar(31, 15, -1) },
  thumb: { lower: fiveBar(0, 17.5, 1), upper: fiveBar(35, 17.5, -1) },
};

export interface LinkagePose {
  a1: Point; // elbow of the o1 chain
  a2: Point; // elbow of the o2 chain
  p: Point; // tactor pivot
}

/** Tactor position and elbows for driven angles (radians). */
export function forwardKinematics(
  geom: FiveBarGeometry,
  theta1: number,
  theta2: number,
): LinkagePose {
  const a1 = {
    x: geom.o1.x + geom.l1 * Math.cos(theta1),
    y: geom.o1.y + geom.l1 * Math.sin(theta1),
  };
  const a2 = {
    x: geom.o2.x + geom.l2 * Math.cos(theta2),
    y: geom.o2.y + geom.l2 * Math.sin(theta2),
  };
  const dx = a2.x - a1.x;
  const dy = a2.y - a1.y;
  const d = Math.hypot(dx, dy);
  if (d < 1e-9) throw new Error("singular: elbows coincide");
  if (d > geom.l3 + geom.l4 || d < Math.abs(geom.l3 - geom.l4)) {
    throw new Error(`no assembly at chord ${d.toFixed(3)} mm`);
  }
  const cosA = Math.min(
    1,
    Math.max(-1, (geom.l3 * geom.l3 - geom.l4 * geom.l4 + d * d) / (2 * geom.l3 * d)),
  );
  const alpha = Math.acos(cosA);
  const c = Math.cos(alpha);
  const s = geom.elbow * Math.sin(alpha);
  const k = geom.l3 / d;
  return {
    a1,
    a2,
    p: { x: a1.x + k * (c * dx - s * dy), y: a1.y + k * (s * dx + c * dy) },
  };
}

export function degToRad(deg: number): number {
  return (deg * Math.PI) / 180;
}

/**
 * Both linkage poses of one station from the snapshot's joints_deg
 * block (upper theta1, theta2, then lower).
 */
export function stationPoses(
  station: StationGeometry,
  joints: [number, number, number, number],
): { upper: LinkagePose; lower: LinkagePose } {
  return {
    upper: forwardKinematics(
      station.upper,
      degToRad(joints[0]),
      degToRad(joints[1]),
    ),
    lower: forwardKinematics(
      station.lower,
      degToRad(joints[2]),
      degToRad(joints[3]),
    ),
  };
}
