"""Two-tactor skin-deformation patterns and the object-sync mapping.

Three scripted fingertip patterns (stretching, slipping, twisting), the
object-pose-synchronized tracking targets used during teleoperation, and
a feature-based classifier that stands in for a human subject when the
pattern pipeline is exercised in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .geometry import Point2, TargetEllipse


class PatternError(Exception):
    """Base class for pattern generation/classification failures."""


class OutOfRange(PatternError):
    """Sample time outside the pattern's [0, duration] window."""


class WorkspaceExceeded(PatternError):
    """A generated sample falls outside the target ellipse."""


class Ambiguous(PatternError):
    """No classifier feature dominates; refusing to guess."""

    def __init__(self, features: dict):
        self.features = dict(features)
        pretty = ", ".join(f"{k.value}={v:.3f} mm" for k, v in features.items())
        super().__init__(f"no dominant motion feature ({pretty})")


class PatternKind(Enum):
    STRETCHING = "stretching"
    SLIPPING = "slipping"
    TWISTING = "twisting"


@dataclass(frozen=True)
class PatternSpec:
    """One scripted pattern: what to play, where, how large, how long.

    amplitude is the stretch half-travel, the slip travel half-height, or
    the twist circle radius. twist_sweep applies to twisting only.
    """

    kind: PatternKind
    center: Point2
    amplitude: float = 4.0       # mm
    duration: float = 1.5        # s
    twist_sweep: float = math.pi / 2  # rad

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class TactorPair:
    """Simultaneous targets for the upper and lower tactor, mm."""

    upper: Point2
    lower: Point2
    t: float = 0.0
    clamped: bool = False

    def midpoint(self) -> Point2:
        return Point2((self.upper.x + self.lower.x) / 2.0,
                      (self.upper.y + self.lower.y) / 2.0)

    def separation(self) -> float:
        return self.upper.dist(self.lower)


@dataclass(frozen=True)
class SyncMapping:
    """Object angle to tactor placement on a circle about the center."""

    radius: float = 3.0            # mm
    gain: float = 1.0              # tactor rad per object rad
    phase_offset: float = math.pi  # rad between the two tactors

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")


def default_spec(kind: PatternKind, center: Point2) -> PatternSpec:
    """Pattern defaults sized to fit the smaller station ellipse."""
    if kind is PatternKind.TWISTING:
        return PatternSpec(kind=kind, center=center, amplitude=3.0)
    return PatternSpec(kind=kind, center=center, amplitude=4.0)


def generate_pattern(spec: PatternSpec, t: float,
                     ellipse: TargetEllipse | None = None) -> TactorPair:
    """Tactor pair of the pattern at time t, linear time parametrization.

    With an ellipse given, samples leaving it raise WorkspaceExceeded
    instead of being clamped: scripted patterns are supposed to be sized
    to their station, unlike live sync targets.
    """
    if not 0.0 <= t <= spec.duration:
        raise OutOfRange(f"t={t:.6g} s outside [0, {spec.duration}] s")
    u = t / spec.duration
    c = spec.center
    a = spec.amplitude
    if spec.kind is PatternKind.STRETCHING:
        # opposed horizontal travel away from the center, upper toward +x
        upper = Point2(c.x + a * u, c.y)
        lower = Point2(c.x - a * u, c.y)
    elif spec.kind is PatternKind.SLIPPING:
        # common translation from center+(0, a) down to center-(0, a)
        p = Point2(c.x, c.y + a * (1.0 - 2.0 * u))
        upper = lower = p
    else:
        phi = spec.twist_sweep * u
        upper = Point2(c.x + a * math.cos(phi), c.y + a * math.sin(phi))
        lower = Point2(c.x - a * math.cos(phi), c.y - a * math.sin(phi))
    if ellipse is not None:
        for p in (upper, lower):
            if not ellipse.contains(p):
                raise WorkspaceExceeded(
                    f"{spec.kind.value} sample ({p.x:.3f}, {p.y:.3f}) mm at t={t:.3f} s "
                    f"outside the target ellipse")
    return TactorPair(upper=upper, lower=lower, t=t)


def sample_pattern(spec: PatternSpec, n: int,
                   ellipse: TargetEllipse | None = None) -> list[TactorPair]:
    """n samples at uniform times over [0, duration], endpoints included."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    # fraction first so the final sample lands exactly on duration
    return [generate_pattern(spec, (i / (n - 1)) * spec.duration, ellipse)
            for i in range(n)]


def object_sync_targets(theta_obj: float, mapping: SyncMapping, center: Point2,
                        ellipse: TargetEllipse | None = None) -> TactorPair:
    """Tactor pair tracking the object's rotation on the sync circle.

    Targets falling outside the ellipse are pulled radially onto its
    boundary and flagged, never rejected: tracking must keep running.
    """
    if not math.isfinite(theta_obj):
        raise ValueError("theta_obj must be finite")
    ang = mapping.gain * theta_obj + math.pi / 2.0
    points = []
    any_clamped = False
    for phase in (0.0, mapping.phase_offset):
        p = Point2(center.x + mapping.radius * math.cos(ang + phase),
                   center.y + mapping.radius * math.sin(ang + phase))
        if ellipse is not None:
            p, was_clamped = ellipse.clamp(p)
            any_clamped |= was_clamped
        points.append(p)
    return TactorPair(upper=points[0], lower=points[1], clamped=any_clamped)


def pattern_features(trajectory: Sequence[TactorPair],
                     sep_floor: float = 0.7) -> dict[PatternKind, float]:
    """Per-kind motion evidence in mm, from the inter-tactor vector.

    stretching: net change of the tactor separation length.
    slipping: net common-mode (midpoint) travel.
    twisting: net signed rotation of the separation vector times its mean
    half-length; rotation increments are only accumulated while both
    endpoints are at least sep_floor apart, so near-coincident tactors
    (slipping, plus sensor noise) cannot fake a rotation.
    """
    if len(trajectory) < 10:
        raise ValueError(f"need >= 10 samples, got {len(trajectory)}")
    rel = [(p.upper.x - p.lower.x, p.upper.y - p.lower.y) for p in trajectory]
    sep = [math.hypot(rx, ry) for rx, ry in rel]
    mid = [p.midpoint() for p in trajectory]

    f_stretch = abs(sep[-1] - sep[0])
    f_slip = mid[-1].dist(mid[0])

    rotation = 0.0
    used = []
    prev_ang = None
    for (rx, ry), s in zip(rel, sep):
        if s < sep_floor:
            prev_ang = None
            continue
        ang = math.atan2(ry, rx)
        if prev_ang is not None:
            rotation += math.remainder(ang - prev_ang, math.tau)
        prev_ang = ang
        used.append(s)
    f_twist = abs(rotation) * (sum(used) / len(used) / 2.0) if used else 0.0

    return {PatternKind.STRETCHING: f_stretch,
            PatternKind.SLIPPING: f_slip,
            PatternKind.TWISTING: f_twist}


def classify_pattern(trajectory: Sequence[TactorPair],
                     min_signal: float = 0.5,
                     margin: float = 2.0,
                     sep_floor: float = 0.7) -> PatternKind:
    """Name the pattern a trajectory shows, or raise Ambiguous.

    The winning feature must reach min_signal (mm) and exceed the
    runner-up by the multiplicative margin; anything weaker is reported
    as Ambiguous rather than guessed.
    """
    features = pattern_features(trajectory, sep_floor=sep_floor)
    ranked = sorted(features.items(), key=lambda kv: kv[1], reverse=True)
    (best_kind, best), (_, second) = ranked[0], ranked[1]
    if best < min_signal or best <= margin * second:
        raise Ambiguous(features)
    return best_kind
