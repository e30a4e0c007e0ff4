"""Analytic grasp physics: a cylinder pivoting in a parallel-jaw gripper.

The object hangs off-axis in the jaws; gravity torques it about the grasp
axis while torsional Coulomb friction at the two fingertip patches
resists, so grip force selects between stick and controlled slip. A
spring-damper virtual fixture renders the grasp force back to the leader
side. Replaces a full physics engine with the few hundred lines the task
actually exercises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .config import FixtureConfig, PhysicsConfig

G_DEFAULT = 9.81


class ContactMode(Enum):
    STICK = "stick"
    SLIP = "slip"


@dataclass(frozen=True)
class ObjectSpec:
    """Rigid cylinder held transversally at grasp_offset from its CoM."""

    mass: float                 # kg
    diameter: float = 0.015     # m
    length: float = 0.10        # m
    grasp_offset: float = 0.04  # m along the cylinder axis

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.diameter <= 0 or self.length <= 0:
            raise ValueError("diameter and length must be positive")
        if not 0 <= self.grasp_offset <= self.length / 2:
            raise ValueError("grasp_offset must lie within the half-length")

    def inertia(self) -> float:
        """Moment about the grasp axis (transverse rod + parallel axis)."""
        return self.mass * (self.length ** 2 / 12.0
                            + self.diameter ** 2 / 16.0
                            + self.grasp_offset ** 2)

    def gravity_torque(self, theta: float, g: float = G_DEFAULT) -> float:
        return self.mass * g * self.grasp_offset * math.cos(theta)


@dataclass(frozen=True)
class PivotState:
    """Object rotation state plus the grip situation that produced it."""

    theta: float = 0.0            # rad, 0 horizontal, pi/2 hanging
    omega: float = 0.0            # rad/s
    mode: ContactMode = ContactMode.STICK
    normal_force: float = 0.0     # N per finger pair
    aperture: float = 0.015       # m

    def __post_init__(self):
        if self.normal_force < 0:
            raise ValueError("normal_force must be >= 0")
        if self.mode is ContactMode.STICK and self.omega != 0.0:
            raise ValueError("stick mode requires omega = 0")


@dataclass(frozen=True)
class FixtureParams:
    """Virtual fixture of the leader gripper: spring-damper wall."""

    stiffness: float = 1000.0   # N/m
    damping: float = 5.0        # N s/m
    engage_at: float = 0.015    # m, gripper coordinate of the object surface

    def __post_init__(self):
        if self.stiffness <= 0:
            raise ValueError("stiffness must be positive")
        if self.damping < 0:
            raise ValueError("damping must be >= 0")


def fixture_params_from_config(cfg: FixtureConfig, engage_at: float) -> FixtureParams:
    return FixtureParams(stiffness=cfg.stiffness, damping=cfg.damping,
                         engage_at=engage_at)


def virtual_fixture_force(x_leader: float, xdot_leader: float,
                          params: FixtureParams) -> float:
    """Spring-damper force once the leader penetrates the fixture.

    Negative return = pushing back against closure (x decreasing past
    engage_at). Zero on and outside the boundary.
    """
    if x_leader >= params.engage_at:
        return 0.0
    return (params.stiffness * (x_leader - params.engage_at)
            + params.damping * xdot_leader)


def grip_contact_force(aperture: float, spec: ObjectSpec,
                       contact_stiffness: float) -> float:
    """Penalty normal force of the jaws squeezing the cylinder."""
    if aperture < 0:
        raise ValueError("aperture must be >= 0")
    squeeze = spec.diameter - aperture
    return contact_stiffness * squeeze if squeeze > 0 else 0.0


def friction_torque_capacity(f_n: float, mu_s: float, r_patch: float) -> float:
    """Torsional break-away torque of the two contact patches."""
    if f_n < 0:
        raise ValueError("F_n must be >= 0")
    return 2.0 * mu_s * f_n * r_patch


def holding_force(spec: ObjectSpec, theta: float, phys: PhysicsConfig) -> float:
    """Smallest normal force that keeps the object stuck at theta."""
    tau_g = abs(spec.gravity_torque(theta, phys.gravity))
    return tau_g / (2.0 * phys.mu_static * phys.patch_radius)


def pivot_step(state: PivotState, spec: ObjectSpec, f_n: float, dt: float,
               phys: PhysicsConfig = PhysicsConfig()) -> PivotState:
    """One physics substep of the stick/slip pivot, semi-implicit Euler.

    Friction saturates at rest: a decelerating step never drives the
    object through zero into reverse rotation, it parks there and the
    stick condition is re-evaluated. dt must stay at or below 1 ms for
    the stated stability/accuracy envelope.
    """
    if dt <= 0 or dt > 1e-3 + 1e-12:
        raise ValueError("pivot_step needs 0 < dt <= 1 ms")
    if f_n < 0:
        raise ValueError("F_n must be >= 0")
    tau_g = spec.gravity_torque(state.theta, phys.gravity)
    cap = friction_torque_capacity(f_n, phys.mu_static, phys.patch_radius)
    inertia = spec.inertia()

    omega = state.omega
    if omega == 0.0 and abs(tau_g) <= cap:
        return replace(state, mode=ContactMode.STICK, omega=0.0, normal_force=f_n)

    direction = math.copysign(1.0, omega if omega != 0.0 else tau_g)
    tau_fric = 2.0 * phys.mu_kinetic * f_n * phys.patch_radius * direction
    alpha = (tau_g - tau_fric - phys.viscous_b * omega) / inertia
    new_omega = omega + alpha * dt
    if omega != 0.0 and new_omega * omega < 0.0:
        # friction cannot reverse the motion it dissipates
        new_omega = 0.0
    if abs(new_omega) < phys.omega_eps and abs(tau_g) <= cap:
        return replace(state, mode=ContactMode.STICK, omega=0.0, normal_force=f_n)
    new_theta = state.theta + new_omega * dt
    return replace(state, theta=new_theta, omega=new_omega,
                   mode=ContactMode.SLIP, normal_force=f_n)


class GripperTracker:
    """Follower jaw aperture under an ideal high-gain position loop.

    Double pole at -omega_n with the PD zero of derivative-on-error
    control: steps settle without steady-state error and ramps are
    followed with vanishing lag.
    """

    def __init__(self, aperture: float, omega_n: float = 40.0):
        if omega_n <= 0:
            raise ValueError("omega_n must be positive")
        self.omega_n = omega_n
        self.aperture = aperture
        self.velocity = 0.0
        self._prev_cmd: float | None = None

    def step(self, cmd: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        w = self.omega_n
        cmd_rate = 0.0 if self._prev_cmd is None else (cmd - self._prev_cmd) / dt
        self._prev_cmd = cmd
        accel = w * w * (cmd - self.aperture) - 2.0 * w * (self.velocity - cmd_rate)
        self.velocity += accel * dt
        self.aperture += self.velocity * dt
        if self.aperture < 0.0:
            self.aperture = 0.0
            self.velocity = max(0.0, self.velocity)
        return self.aperture


def gripper_track(aperture_cmd: float, tracker: GripperTracker, dt: float) -> float:
    """Advance the aperture tracker one step toward aperture_cmd."""
    return tracker.step(aperture_cmd, dt)


class PivotSim:
    """Gripper + object in one box: command an aperture, read the pivot.

    Substeps the physics at phys.substep_dt under whatever tick dt the
    caller uses (a whole multiple of the substep).
    """

    def __init__(self, spec: ObjectSpec, phys: PhysicsConfig = PhysicsConfig(),
                 theta0: float = 0.0, aperture0: float | None = None,
                 omega_n: float | None = None):
        self.spec = spec
        self.phys = phys
        start_ap = spec.diameter if aperture0 is None else aperture0
        self.tracker = GripperTracker(
            start_ap, omega_n if omega_n is not None else phys.gripper_bandwidth)
        f0 = grip_contact_force(start_ap, spec, phys.contact_stiffness)
        self.state = PivotState(theta=theta0, omega=0.0, mode=ContactMode.STICK,
                                normal_force=f0, aperture=start_ap)
        self.time = 0.0

    def grip_with_force(self, f_n: float):
        """Teleport the jaws to the aperture that yields f_n (test setup)."""
        aperture = self.spec.diameter - f_n / self.phys.contact_stiffness
        if aperture < 0:
            raise ValueError("requested force exceeds the penalty model range")
        self.tracker.aperture = aperture
        self.tracker.velocity = 0.0
        self.tracker._prev_cmd = None
        self.state = replace(self.state, normal_force=f_n, aperture=aperture)

    def step(self, aperture_cmd: float, dt: float) -> PivotState:
        n = max(1, round(dt / self.phys.substep_dt))
        sub = dt / n
        st = self.state
        for _ in range(n):
            aperture = self.tracker.step(aperture_cmd, sub)
            f_n = grip_contact_force(aperture, self.spec, self.phys.contact_stiffness)
            st = pivot_step(st, self.spec, f_n, sub, self.phys)
            st = replace(st, aperture=aperture)
        self.state = st
        self.time += dt
        return st
