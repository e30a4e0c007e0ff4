"""Planar five-bar linkage kinematics for the tactor device stations.

Each station carries two five-bar mechanisms (lower and upper) that share a
fingertip workspace. A mechanism has two driven base joints O1, O2 with
proximal links L1, L2 and distal links L3, L4 meeting at the tactor point P.
Angles are measured CCW from the +x axis of the station base frame.
All positions are in millimetres, angles in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class KinematicsError(Exception):
    """Base class for kinematic failures."""


class NoAssembly(KinematicsError):
    """The distal links cannot close onto a common tactor point."""


class Singular(KinematicsError):
    """Configuration is at (or within tolerance of) a singularity."""


class Unreachable(KinematicsError):
    """Requested tactor position violates a chain's annulus bounds."""


class ResolutionTooCoarse(KinematicsError):
    """Workspace raster cannot resolve the target ellipse."""


# Configurations closer than this to an assembly boundary are rejected
# instead of producing ill-conditioned output.
SINGULARITY_TOL = 1e-9  # mm


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = math.remainder(a, math.tau)
    return math.pi if r <= -math.pi else r


class Elbow(Enum):
    """Branch selector for the two circle-intersection solutions."""

    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def sign(self) -> float:
        return 1.0 if self is Elbow.POSITIVE else -1.0


@dataclass(frozen=True)
class Point2:
    """A point in the station base frame, mm."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class JointAngles:
    """Driven joint angles (theta1, theta2), normalized to (-pi, pi]."""

    theta1: float
    theta2: float

    def __post_init__(self):
        if not (math.isfinite(self.theta1) and math.isfinite(self.theta2)):
            raise ValueError("non-finite joint angles")
        object.__setattr__(self, "theta1", wrap_angle(self.theta1))
        object.__setattr__(self, "theta2", wrap_angle(self.theta2))


@dataclass(frozen=True)
class LinkageGeometry:
    """Base joints and link lengths of one five-bar mechanism.

    ``elbow`` fixes the sign of the assembly rotation: POSITIVE picks the
    tactor point to the left of the A1->A2 chord (larger y when the chord
    runs along +x), NEGATIVE the mirror solution. Lower mechanisms bend
    toward the fingertip with POSITIVE, upper mechanisms with NEGATIVE.
    """

    o1: Point2
    o2: Point2
    l1: float
    l2: float
    l3: float
    l4: float
    elbow: Elbow = Elbow.POSITIVE

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "l4"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        base = self.o2.dist(self.o1)
        if base == 0:
            raise ValueError("base joints o1 and o2 coincide")
        if self.l1 + self.l3 + self.l2 + self.l4 <= base:
            raise ValueError("links too short: chains can never meet")

    def chain(self, i: int) -> tuple[Point2, float, float]:
        """Base point, proximal and distal length of chain i in {1, 2}."""
        if i == 1:
            return self.o1, self.l1, self.l3
        return self.o2, self.l2, self.l4


def intermediate_joints(geom: LinkageGeometry, q: JointAngles) -> tuple[Point2, Point2]:
    """Positions of the elbow joints A1, A2 driven by (theta1, theta2)."""
    a1 = Point2(geom.o1.x + geom.l1 * math.cos(q.theta1),
                geom.o1.y + geom.l1 * math.sin(q.theta1))
    a2 = Point2(geom.o2.x + geom.l2 * math.cos(q.theta2),
                geom.o2.y + geom.l2 * math.sin(q.theta2))
    return a1, a2


def forward_kinematics(geom: LinkageGeometry, q: JointAngles,
                       clamp: bool = False) -> Point2:
    """Tactor position for driven angles, resolving the elbow branch.

    Raises Singular when A1 and A2 coincide, NoAssembly when the distal
    links cannot close (chord outside [|L3-L4|, L3+L4], with tolerance).
    With clamp=True a marginally out-of-range chord is projected onto the
    assembly boundary instead (the linkage at full stretch/fold), which
    state publication needs while independently driven motors are mid
    transient; the strict contract stays the default.
    """
    a1, a2 = intermediate_joints(geom, q)
    dx = a2.x - a1.x
    dy = a2.y - a1.y
    d = math.hypot(dx, dy)
    if d <= SINGULARITY_TOL:
        raise Singular(f"intermediate joints coincide (|A2-A1|={d:.3g} mm)")
    gap = abs(geom.l3 - geom.l4)
    if not clamp:
        if d >= geom.l3 + geom.l4 - SINGULARITY_TOL:
            raise NoAssembly(f"chord {d:.6g} mm exceeds distal reach {geom.l3 + geom.l4} mm")
        if gap > 0 and d <= gap + SINGULARITY_TOL:
            raise NoAssembly(f"chord {d:.6g} mm inside distal annulus gap {gap} mm")
    cos_a = (geom.l3 ** 2 - geom.l4 ** 2 + d * d) / (2.0 * geom.l3 * d)
    cos_a = min(1.0, max(-1.0, cos_a))
    alpha = math.acos(cos_a)
    s = geom.elbow.sign
    c, sn = math.cos(alpha), s * math.sin(alpha)
    k = geom.l3 / d
    return Point2(a1.x + k * (c * dx - sn * dy),
                  a1.y + k * (sn * dx + c * dy))


def _chain_solutions(geom: LinkageGeometry, p: Point2, i: int) -> dict:
    """Both elbow placements of chain i for target p: sign -> (theta, A).

    Raises the chain-level errors (annulus violation, base coincidence)
    that no branch choice can fix.
    """
    o, l_prox, l_dist = geom.chain(i)
    vx = p.x - o.x
    vy = p.y - o.y
    rho = math.hypot(vx, vy)
    if rho <= SINGULARITY_TOL:
        raise Singular(f"target coincides with base joint O{i}")
    if rho >= l_prox + l_dist - SINGULARITY_TOL:
        raise Unreachable(f"chain {i}: |p-O{i}|={rho:.6g} mm beyond reach {l_prox + l_dist} mm")
    gap = abs(l_prox - l_dist)
    if rho <= gap + SINGULARITY_TOL:
        raise Unreachable(f"chain {i}: |p-O{i}|={rho:.6g} mm inside annulus gap {gap} mm")
    cos_b = (l_prox ** 2 - l_dist ** 2 + rho * rho) / (2.0 * l_prox * rho)
    cos_b = min(1.0, max(-1.0, cos_b))
    beta = math.acos(cos_b)
    out = {}
    for sign in (1.0, -1.0):
        c, sn = math.cos(sign * beta), math.sin(sign * beta)
        ax = c * vx - sn * vy
        ay = sn * vx + c * vy
        out[sign] = (math.atan2(ay, ax),
                     Point2(o.x + l_prox / rho * ax, o.y + l_prox / rho * ay))
    return out


def inverse_kinematics(geom: LinkageGeometry, p: Point2,
                       hint: JointAngles | None = None) -> JointAngles:
    """Driven angles placing the tactor at p on the configured elbow branch.

    Each chain admits two elbow placements; a combination is valid only if
    the resulting chord A1->A2 has p on the side geom.elbow selects, so
    that forward_kinematics maps the answer back to p. Without a hint,
    combinations are tried canonical-first ((+, -) chain rotations for
    POSITIVE elbow) and the first valid one wins. Near workspace extremes
    more than one combination can assemble on the same branch; a control
    loop should pass its current joint angles as hint, and the valid
    solution nearest the hint (summed wrapped angle distance) is returned,
    which keeps posture continuous instead of flipping working modes.
    Points inside both annuli but with no valid combination cannot be
    assembled on this branch and raise Unreachable.
    """
    s = geom.elbow.sign
    sol1 = _chain_solutions(geom, p, 1)
    sol2 = _chain_solutions(geom, p, 2)
    found: list[JointAngles] = []
    for c1, c2 in ((s, -s), (-s, s), (s, s), (-s, -s)):
        t1, a1 = sol1[c1]
        t2, a2 = sol2[c2]
        chord = a1.dist(a2)
        if chord <= SINGULARITY_TOL:
            continue
        cross = (a2.x - a1.x) * (p.y - a1.y) - (a2.y - a1.y) * (p.x - a1.x)
        if s * cross > 0.0:
            if hint is None:
                return JointAngles(t1, t2)
            found.append(JointAngles(t1, t2))
    if found:
        def dist(q: JointAngles) -> float:
            return (abs(wrap_angle(q.theta1 - hint.theta1))
                    + abs(wrap_angle(q.theta2 - hint.theta2)))
        return min(found, key=dist)
    raise Unreachable(
        f"({p.x:.6g}, {p.y:.6g}) mm is inside both annuli but not assemblable "
        f"on the {geom.elbow.value} elbow branch")


def is_reachable(geom: LinkageGeometry, p: Point2) -> bool:
    """True iff both chains satisfy their annulus condition for p."""
    for i in (1, 2):
        o, l_prox, l_dist = geom.chain(i)
        rho = p.dist(o)
        if not (abs(l_prox - l_dist) <= rho <= l_prox + l_dist):
            return False
    return True


def reachable_mask(geom: LinkageGeometry, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized is_reachable over coordinate arrays of equal shape."""
    mask = np.ones(np.broadcast(xs, ys).shape, dtype=bool)
    for i in (1, 2):
        o, l_prox, l_dist = geom.chain(i)
        rho = np.hypot(xs - o.x, ys - o.y)
        mask &= (rho >= abs(l_prox - l_dist)) & (rho <= l_prox + l_dist)
    return mask


@dataclass(frozen=True)
class TargetEllipse:
    """Fingertip area of interest: center and semi-axes, mm."""

    center: Point2
    semi_x: float
    semi_y: float

    def __post_init__(self):
        if self.semi_x <= 0 or self.semi_y <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    def level(self, p: Point2) -> float:
        """Ellipse level set: <= 1 inside, 1 on the boundary."""
        nx = (p.x - self.center.x) / self.semi_x
        ny = (p.y - self.center.y) / self.semi_y
        return nx * nx + ny * ny

    def contains(self, p: Point2, tol: float = 1e-12) -> bool:
        return self.level(p) <= 1.0 + tol

    def clamp(self, p: Point2) -> tuple[Point2, bool]:
        """Pull p radially toward the center onto the boundary if outside."""
        lv = self.level(p)
        if lv <= 1.0:
            return p, False
        scale = 1.0 / math.sqrt(lv)
        return Point2(self.center.x + (p.x - self.center.x) * scale,
                      self.center.y + (p.y - self.center.y) * scale), True

    def boundary_points(self, n: int) -> list[Point2]:
        return [Point2(self.center.x + self.semi_x * math.cos(t),
                       self.center.y + self.semi_y * math.sin(t))
                for t in np.linspace(0.0, math.tau, n, endpoint=False)]


@dataclass
class WorkspaceGrid:
    """Reachability raster for a station's lower and upper mechanisms.

    Arrays are indexed [ix, iy]; cell (ix, iy) is centered at
    (x0 + (ix+0.5)*resolution, y0 + (iy+0.5)*resolution).
    """

    resolution: float
    x0: float
    y0: float
    nx: int
    ny: int
    lower: np.ndarray
    upper: np.ndarray
    both: np.ndarray
    target_ellipse: TargetEllipse

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.x0 + (ix + 0.5) * self.resolution,
                self.y0 + (iy + 0.5) * self.resolution)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.resolution
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.resolution
        return np.meshgrid(xs, ys, indexing="ij")

    def intersection_area_mm2(self) -> float:
        return float(self.both.sum()) * self.resolution ** 2

    def ellipse_cells_covered(self) -> tuple[int, int]:
        """(cells inside the ellipse, of those how many are both-reachable)."""
        gx, gy = self.cell_centers()
        exn = (gx - self.target_ellipse.center.x) / self.target_ellipse.semi_x
        eyn = (gy - self.target_ellipse.center.y) / self.target_ellipse.semi_y
        inside = exn * exn + eyn * eyn <= 1.0
        return int(inside.sum()), int(self.both[inside].sum())


def compute_workspace(geom_lower: LinkageGeometry, geom_upper: LinkageGeometry,
                      resolution: float, ellipse: TargetEllipse) -> WorkspaceGrid:
    """Raster reachability of both mechanisms over their joint bounding box."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    minor = 2.0 * min(ellipse.semi_x, ellipse.semi_y)
    if minor / resolution < 10.0:
        raise ResolutionTooCoarse(
            f"{minor / resolution:.2f} cells across the {minor} mm ellipse minor axis, need >= 10")

    xs_lo, xs_hi, ys_lo, ys_hi = [], [], [], []
    for geom in (geom_lower, geom_upper):
        for i in (1, 2):
            o, l_prox, l_dist = geom.chain(i)
            reach = l_prox + l_dist
            xs_lo.append(o.x - reach)
            xs_hi.append(o.x + reach)
            ys_lo.append(o.y - reach)
            ys_hi.append(o.y + reach)
    x0, y0 = min(xs_lo), min(ys_lo)
    nx = max(1, math.ceil((max(xs_hi) - x0) / resolution))
    ny = max(1, math.ceil((max(ys_hi) - y0) / resolution))

    gx = x0 + (np.arange(nx) + 0.5) * resolution
    gy = y0 + (np.arange(ny) + 0.5) * resolution
    gxx, gyy = np.meshgrid(gx, gy, indexing="ij")
    lower = reachable_mask(geom_lower, gxx, gyy)
    upper = reachable_mask(geom_upper, gxx, gyy)
    return WorkspaceGrid(resolution=resolution, x0=x0, y0=y0, nx=nx, ny=ny,
                         lower=lower, upper=upper, both=lower & upper,
                         target_ellipse=ellipse)
