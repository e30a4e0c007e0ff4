"""100 Hz device control loop with simulated motors and collision arbitration.

Per tick and station: validate the requested tactor targets through IK,
arbitrate upper/lower link clearance (upper wins, lower gets displaced to
the nearest feasible point), run one PID update per motor, substep the
first-order motor plants at 1 kHz, and publish state from the quantized
sensor readings so nothing downstream ever sees unsensed truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .config import PidConfig, PlantConfig, RigConfig, StationConfig
from .geometry import (JointAngles, KinematicsError, LinkageGeometry, Point2,
                       Unreachable, forward_kinematics, intermediate_joints,
                       inverse_kinematics, wrap_angle)
from .patterns import TactorPair

CONTROL_DT = 0.01   # s, fixed control period
PLANT_SUBSTEPS = 10  # 1 kHz plant integration inside each tick
CLEARANCE_MIN = 1.5  # mm between link center-lines (3 mm wide bars)


class NoFeasibleLowerTarget(Exception):
    """Arbitration search exhausted without restoring clearance."""


def _point_segment_distance(p: Point2, a: Point2, b: Point2) -> float:
    abx, aby = b.x - a.x, b.y - a.y
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return p.dist(a)
    t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(p.x - (a.x + t * abx), p.y - (a.y + t * aby))


def segment_distance(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> float:
    """Minimum distance between 2D segments p1p2 and q1q2.

    Strictly crossing segments are 0 apart; every touching or disjoint
    case reduces to the nearest endpoint-to-segment distance.
    """
    def orient(a, b, c):
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if (d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0):
        return 0.0
    return min(_point_segment_distance(p1, q1, q2),
               _point_segment_distance(p2, q1, q2),
               _point_segment_distance(q1, p1, p2),
               _point_segment_distance(q2, p1, p2))


def link_segments(geom: LinkageGeometry, q: JointAngles,
                  clamp: bool = False) -> list[tuple[Point2, Point2]]:
    """The four link center-lines of one mechanism at configuration q."""
    a1, a2 = intermediate_joints(geom, q)
    p = forward_kinematics(geom, q, clamp=clamp)
    return [(geom.o1, a1), (a1, p), (geom.o2, a2), (a2, p)]


def mechanism_clearance(segs_a: list, segs_b: list) -> float:
    return min(segment_distance(pa, pb, qa, qb)
               for pa, pb in segs_a for qa, qb in segs_b)


_RADIAL_DIRS = 36
_RADIAL_STEP = 0.25  # mm
_RADIAL_MAX = 60.0   # mm


def _radial_candidates(center: Point2):
    """Candidate lower targets by growing rings, deterministic scan order."""
    n_rings = int(_RADIAL_MAX / _RADIAL_STEP)
    for ring in range(1, n_rings + 1):
        r = ring * _RADIAL_STEP
        for k in range(_RADIAL_DIRS):
            ang = math.tau * k / _RADIAL_DIRS
            yield Point2(center.x + r * math.cos(ang), center.y + r * math.sin(ang))


def arbitrate_collision(upper_target: Point2, lower_target: Point2,
                        geom_upper: LinkageGeometry, geom_lower: LinkageGeometry,
                        clearance_min: float = CLEARANCE_MIN,
                        upper_hint: JointAngles | None = None,
                        lower_hint: JointAngles | None = None
                        ) -> tuple[Point2, Point2, bool]:
    """Resolve upper/lower link interference; the upper target never moves.

    The lower target is displaced to the first candidate restoring
    clearance, scanning 36 directions per 0.25 mm ring outward from the
    request, so the chosen point is the nearest feasible one at that
    granularity. Raises NoFeasibleLowerTarget when the scan exhausts.
    Hints select the IK posture clearances are evaluated at (the posture
    the mechanisms will actually drive to).
    """
    upper_segs = link_segments(
        geom_upper, inverse_kinematics(geom_upper, upper_target, hint=upper_hint))

    def clearance_of(candidate: Point2) -> float | None:
        try:
            q = inverse_kinematics(geom_lower, candidate, hint=lower_hint)
        except KinematicsError:
            return None
        return mechanism_clearance(upper_segs, link_segments(geom_lower, q))

    base = clearance_of(lower_target)
    if base is None:
        raise Unreachable("lower target not reachable at arbitration time")
    if base >= clearance_min:
        return upper_target, lower_target, False
    for cand in _radial_candidates(lower_target):
        c = clearance_of(cand)
        if c is not None and c >= clearance_min:
            return upper_target, cand, True
    raise NoFeasibleLowerTarget(
        f"no lower target within {_RADIAL_MAX} mm of ({lower_target.x:.2f}, "
        f"{lower_target.y:.2f}) restores {clearance_min} mm clearance")


class MotorPlant:
    """First-order DC motor velocity plant with a quantizing sensor."""

    def __init__(self, angle: float = 0.0, cfg: PlantConfig = PlantConfig()):
        self.angle = angle
        self.velocity = 0.0
        self.last_voltage = 0.0  # post-saturation drive from the last step
        self.time_constant = cfg.time_constant
        self.gain = cfg.gain
        self.voltage_limit = cfg.voltage_limit
        self.sensor_bits = cfg.sensor_bits
        self.sensor_range = cfg.sensor_range
        if self.time_constant <= 0:
            raise ValueError("time_constant must be positive")
        if self.sensor_bits < 8:
            raise ValueError("sensor needs at least 8 bits")

    @property
    def lsb(self) -> float:
        return self.sensor_range / (1 << self.sensor_bits)

    def reading(self) -> float:
        return round(self.angle / self.lsb) * self.lsb

    def step(self, voltage: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        v = min(self.voltage_limit, max(-self.voltage_limit, voltage))
        self.last_voltage = v
        self.velocity += (self.gain * v - self.velocity) / self.time_constant * dt
        self.angle += self.velocity * dt
        return self.reading()


def motor_plant_step(plant: MotorPlant, voltage: float, dt: float) -> float:
    return plant.step(voltage, dt)


class PidController:
    """Position PID on joint angle, anti-windup clamped, output saturated."""

    def __init__(self, cfg: PidConfig = PidConfig(), dt: float = CONTROL_DT):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.kp, self.ki, self.kd = cfg.kp, cfg.ki, cfg.kd
        self.integral_limit = cfg.integral_limit
        self.output_limit = cfg.output_limit
        self.dt = dt
        self.integral = 0.0  # volts contributed by the I term
        self._prev_error: float | None = None

    def step(self, target: float, actual: float) -> float:
        e = wrap_angle(target - actual)
        self.integral += self.ki * e * self.dt
        self.integral = min(self.integral_limit,
                            max(-self.integral_limit, self.integral))
        de = 0.0 if self._prev_error is None else (e - self._prev_error) / self.dt
        self._prev_error = e
        out = self.kp * e + self.integral + self.kd * de
        return min(self.output_limit, max(-self.output_limit, out))

    def reset(self):
        self.integral = 0.0
        self._prev_error = None


def pid_step(ctrl: PidController, target: float, actual: float) -> float:
    return ctrl.step(target, actual)


@dataclass(frozen=True)
class MechanismState:
    requested: Point2          # last accepted request, pre-arbitration
    target: Point2             # post-arbitration target being tracked
    theta_target: JointAngles
    theta_actual: JointAngles  # quantized sensor readings
    tactor: Point2             # FK(theta_actual)
    rejected: bool = False     # last request failed IK and was held


@dataclass(frozen=True)
class StationState:
    upper: MechanismState
    lower: MechanismState
    arbitration_active: bool
    parked: bool               # lower at home because no feasible target
    clearance: float           # mm, between actual link configurations


@dataclass(frozen=True)
class DeviceState:
    tick: int
    time: float
    stations: dict[str, StationState]


class _Mechanism:
    """One five-bar: two motors, two PIDs, its geometry and bookkeeping."""

    def __init__(self, geom: LinkageGeometry, home: JointAngles,
                 plant_cfg: PlantConfig, pid_cfg: PidConfig):
        self.geom = geom
        self.home = home
        self.plants = [MotorPlant(home.theta1, plant_cfg),
                       MotorPlant(home.theta2, plant_cfg)]
        # PID runs at the plant substep rate (motor drive electronics are an
        # order of magnitude faster than the 100 Hz command loop).
        sub = CONTROL_DT / PLANT_SUBSTEPS
        self.pids = [PidController(pid_cfg, dt=sub), PidController(pid_cfg, dt=sub)]
        self.requested = forward_kinematics(geom, home)
        self.target = self.requested
        self.theta_target = home

    def accept_request(self, req: Point2 | None) -> bool:
        """Adopt a new requested target if IK admits it; report rejection."""
        if req is None:
            return False
        try:
            inverse_kinematics(self.geom, req)
        except KinematicsError:
            return True
        self.requested = req
        return False

    def sensed(self) -> JointAngles:
        return JointAngles(self.plants[0].reading(), self.plants[1].reading())

    def drive(self, theta_target: JointAngles):
        self.theta_target = theta_target
        sub = CONTROL_DT / PLANT_SUBSTEPS
        for _ in range(PLANT_SUBSTEPS):
            for pid, plant, tgt in zip(self.pids, self.plants,
                                       (theta_target.theta1, theta_target.theta2)):
                plant.step(pid.step(tgt, plant.reading()), sub)

    def snapshot(self, rejected: bool) -> MechanismState:
        actual = self.sensed()
        return MechanismState(requested=self.requested, target=self.target,
                              theta_target=self.theta_target,
                              theta_actual=actual,
                              tactor=forward_kinematics(self.geom, actual, clamp=True),
                              rejected=rejected)


class _Station:
    def __init__(self, cfg: StationConfig, plant_cfg: PlantConfig, pid_cfg: PidConfig):
        self.cfg = cfg
        self.upper = _Mechanism(cfg.upper, JointAngles(*cfg.home_upper_angles),
                                plant_cfg, pid_cfg)
        self.lower = _Mechanism(cfg.lower, JointAngles(*cfg.home_lower_angles),
                                plant_cfg, pid_cfg)

    def snapshot_initial(self) -> StationState:
        clearance = mechanism_clearance(
            link_segments(self.upper.geom, self.upper.sensed(), clamp=True),
            link_segments(self.lower.geom, self.lower.sensed(), clamp=True))
        return StationState(upper=self.upper.snapshot(False),
                            lower=self.lower.snapshot(False),
                            arbitration_active=False, parked=False,
                            clearance=clearance)

    def tick(self, pair: TactorPair | None) -> StationState:
        up_rej = self.upper.accept_request(pair.upper if pair else None)
        lo_rej = self.lower.accept_request(pair.lower if pair else None)

        parked = False
        up_hint, lo_hint = self.upper.sensed(), self.lower.sensed()
        try:
            up_t, lo_t, active = arbitrate_collision(
                self.upper.requested, self.lower.requested,
                self.upper.geom, self.lower.geom,
                upper_hint=up_hint, lower_hint=lo_hint)
        except NoFeasibleLowerTarget:
            up_t = self.upper.requested
            lo_t = forward_kinematics(self.lower.geom, self.lower.home)
            active, parked = True, True

        self.upper.target, self.lower.target = up_t, lo_t
        self.upper.drive(inverse_kinematics(self.upper.geom, up_t, hint=up_hint))
        self.lower.drive(inverse_kinematics(self.lower.geom, lo_t, hint=lo_hint))

        clearance = mechanism_clearance(
            link_segments(self.upper.geom, self.upper.sensed(), clamp=True),
            link_segments(self.lower.geom, self.lower.sensed(), clamp=True))
        return StationState(upper=self.upper.snapshot(up_rej),
                            lower=self.lower.snapshot(lo_rej),
                            arbitration_active=active, parked=parked,
                            clearance=clearance)


class DeviceSim:
    """Both finger stations under the fixed 100 Hz control loop."""

    def __init__(self, rig: RigConfig | None = None):
        rig = rig or RigConfig()
        self.stations = {name: _Station(cfg, rig.plant, rig.pid)
                         for name, cfg in rig.stations.items()}
        self.tick_count = 0
        self.state = self._publish({name: st.snapshot_initial() for name, st
                                    in self.stations.items()}, advance=False)

    def _publish(self, station_states: dict, advance: bool = True) -> DeviceState:
        if advance:
            self.tick_count += 1
        self.state = DeviceState(tick=self.tick_count,
                                 time=self.tick_count * CONTROL_DT,
                                 stations=station_states)
        return self.state

    def tick(self, targets: dict[str, TactorPair | None] | None = None,
             dt: float = CONTROL_DT) -> DeviceState:
        if abs(dt - CONTROL_DT) > 1e-12:
            raise ValueError("control period is fixed at 10 ms")
        targets = targets or {}
        states = {name: st.tick(targets.get(name))
                  for name, st in self.stations.items()}
        return self._publish(states)


def device_tick(sim: DeviceSim, targets: dict[str, TactorPair | None] | None = None,
                dt: float = CONTROL_DT) -> DeviceState:
    return sim.tick(targets, dt)
