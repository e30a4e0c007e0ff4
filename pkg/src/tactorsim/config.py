"""Configuration for the simulated rig: station geometry, plants, physics.

Defaults reproduce the hardware dimensions and the simulation constants
frozen by the golden tests. Any value can be overridden from a TOML file
(one table per station plus [plant], [pid], [physics], [fixture],
[operator], [harness] tables; see configs/default.toml).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

from .geometry import Elbow, LinkageGeometry, Point2, TargetEllipse

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FINGERS = ("index", "thumb")

# Mechanism dimensions, mm. One row set per finger station; the upper
# mechanism reuses the link lengths with its own base origins.
_STATION_DIMS = {
    "index": dict(o1=(0.0, 0.0), o2=(12.5, 0.0), o3=(0.0, 31.0), o4=(12.5, 31.0),
                  l1=9.0, l2=9.0, l3=15.0, l4=15.0,
                  ellipse_center=(6.25, 15.5), ellipse_axes=(15.0, 12.0)),
    "thumb": dict(o1=(0.0, 0.0), o2=(12.5, 0.0), o3=(0.0, 35.0), o4=(12.5, 35.0),
                  l1=9.0, l2=9.0, l3=17.5, l4=17.5,
                  ellipse_center=(6.25, 17.5), ellipse_axes=(15.0, 14.0)),
}


@dataclass(frozen=True)
class StationConfig:
    """One finger station: lower and upper five-bar plus fingertip ellipse."""

    name: str
    lower: LinkageGeometry
    upper: LinkageGeometry
    ellipse: TargetEllipse

    # Retracted parking poses, used when a mechanism must get out of the way.
    home_lower_angles: tuple[float, float] = (-math.pi / 2, -math.pi / 2)
    home_upper_angles: tuple[float, float] = (math.pi / 2, math.pi / 2)


def _station_from_dims(name: str, dims: dict) -> StationConfig:
    lengths = dict(l1=float(dims["l1"]), l2=float(dims["l2"]),
                   l3=float(dims["l3"]), l4=float(dims["l4"]))
    lower = LinkageGeometry(o1=Point2(*dims["o1"]), o2=Point2(*dims["o2"]),
                            elbow=Elbow.POSITIVE, **lengths)
    upper = LinkageGeometry(o1=Point2(*dims["o3"]), o2=Point2(*dims["o4"]),
                            elbow=Elbow.NEGATIVE, **lengths)
    cx, cy = dims["ellipse_center"]
    ax, ay = dims["ellipse_axes"]
    ellipse = TargetEllipse(center=Point2(cx, cy), semi_x=ax / 2.0, semi_y=ay / 2.0)
    return StationConfig(name=name, lower=lower, upper=upper, ellipse=ellipse)


def station(name: str) -> StationConfig:
    """Built-in station geometry by finger name."""
    if name not in _STATION_DIMS:
        raise KeyError(f"unknown finger {name!r}, expected one of {FINGERS}")
    return _station_from_dims(name, _STATION_DIMS[name])


@dataclass(frozen=True)
class PlantConfig:
    """Simulated DC motor plant with a quantizing angle sensor."""

    time_constant: float = 0.020   # s
    gain: float = 35.0             # rad/s per volt
    voltage_limit: float = 6.0     # V
    sensor_bits: int = 12
    sensor_range: float = math.radians(270.0)  # rad


@dataclass(frozen=True)
class PidConfig:
    # Golden gains: frozen after tuning against the 50 ms settling oracle
    # on the default plant (PID stepped at the plant substep rate).
    kp: float = 8.0       # V/rad
    ki: float = 20.0      # V/(rad s)
    kd: float = 0.08      # V s/rad
    integral_limit: float = 0.1  # V contributed by the integral term
    output_limit: float = 6.0    # V


@dataclass(frozen=True)
class FixtureConfig:
    """Grasp-force virtual fixture (spring-damper on the leader gripper)."""

    stiffness: float = 1000.0  # N/m
    damping: float = 5.0       # N s/m


@dataclass(frozen=True)
class PhysicsConfig:
    """Pivot contact physics constants."""

    gravity: float = 9.81          # m/s^2
    mu_static: float = 0.6
    mu_kinetic: float = 0.45
    patch_radius: float = 0.002    # m, effective torsional contact patch
    viscous_b: float = 1e-5        # N m s
    contact_stiffness: float = 2000.0  # N/m, gripper finger penalty contact
    omega_eps: float = 1e-3        # rad/s, slip->stick capture band
    substep_dt: float = 1e-3       # s, physics substep under the control tick
    gripper_bandwidth: float = 120.0  # rad/s, aperture tracking natural frequency


@dataclass(frozen=True)
class OperatorConfig:
    """Scripted operator parameters (simulated human stand-in)."""

    reaction_delay: float = 0.15     # s
    gain: float = 1e-5               # m of extra opening per degree of commanded step
    observation_noise: float = 1.0   # deg std
    stop_band: float = 2.0           # deg


@dataclass(frozen=True)
class HarnessConfig:
    """Trial protocol constants."""

    masses: tuple[float, ...] = (0.005, 0.01, 0.02)        # kg
    target_angles: tuple[float, ...] = (25.0, 45.0, 75.0)  # deg
    repetitions: int = 5
    timeout: float = 30.0          # s per trial
    visual_latency: float = 0.10   # s
    force_latency: float = 0.02    # s
    tactile_latency: float = 0.02  # s
    hold_safety: float = 2.5       # firm grip force / holding threshold
    stable_window: float = 0.5     # s of stick needed to call a trial done
    drop_window: float = 0.5       # s without contact before flagging a drop


@dataclass(frozen=True)
class ServiceConfig:
    control_rate: float = 100.0   # Hz device/physics tick
    state_rate: float = 50.0      # Hz snapshot stream
    sync_radius: float = 3.0      # mm, tactor circle tracking the object
    sync_gain: float = 1.0        # object angle to tactor angle


@dataclass(frozen=True)
class RigConfig:
    """Everything needed to build the full simulated rig."""

    stations: dict[str, StationConfig] = field(
        default_factory=lambda: {f: station(f) for f in FINGERS})
    plant: PlantConfig = PlantConfig()
    pid: PidConfig = PidConfig()
    fixture: FixtureConfig = FixtureConfig()
    physics: PhysicsConfig = PhysicsConfig()
    operator: OperatorConfig = OperatorConfig()
    harness: HarnessConfig = HarnessConfig()
    service: ServiceConfig = ServiceConfig()


def _override(cfg, table: dict):
    fields = {f for f in cfg.__dataclass_fields__}
    unknown = set(table) - fields
    if unknown:
        raise KeyError(f"unknown config keys {sorted(unknown)} for {type(cfg).__name__}")
    coerced = {}
    for k, v in table.items():
        if isinstance(v, list):
            v = tuple(v)
        coerced[k] = v
    return replace(cfg, **coerced)


def load_config(path: str | None = None) -> RigConfig:
    """Build the rig config, overlaying a TOML file when given."""
    if path is None:
        return RigConfig()
    with open(path, "rb") as fh:
        data = tomllib.load(fh)

    stations = {}
    for name in FINGERS:
        dims = dict(_STATION_DIMS[name])
        dims.update(data.get("station", {}).get(name, {}))
        stations[name] = _station_from_dims(name, dims)

    cfg = RigConfig(stations=stations)
    for key, attr in (("plant", "plant"), ("pid", "pid"), ("fixture", "fixture"),
                      ("physics", "physics"), ("operator", "operator"),
                      ("harness", "harness"), ("service", "service")):
        if key in data:
            cfg = replace(cfg, **{attr: _override(getattr(cfg, attr), data[key])})
    return cfg
