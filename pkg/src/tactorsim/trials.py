"""Randomized pivoting trial protocol with a scripted operator.

The operator is a pulse-and-wait ratchet: hold the object near its slip
threshold, briefly drop the grip force to let it pivot a controlled
increment, regrip, wait out the feedback latency, repeat. Feedback
conditions change only what the operator observes (which channel carries
the object angle and whether regrips can be confirmed by force); the
grasp physics never sees the condition flags.
"""

from __future__ import annotations

import csv
import json
import math
import random
import statistics
from dataclasses import dataclass, field

from .config import HarnessConfig, OperatorConfig, PhysicsConfig
from .pivot import ContactMode, ObjectSpec, PivotSim, holding_force


class HarnessError(Exception):
    pass


class EmptyInput(HarnessError):
    """aggregate() called with no results."""


@dataclass(frozen=True)
class Condition:
    """Feedback condition; vision is always present."""

    grasp_force: bool = False
    tactile: bool = False
    visual: bool = True

    def __post_init__(self):
        if not self.visual:
            raise ValueError("visual feedback is always on")

    @property
    def label(self) -> str:
        parts = ["VF"]
        if self.grasp_force:
            parts.append("GF")
        if self.tactile:
            parts.append("TF")
        return "+".join(parts)

    @classmethod
    def parse(cls, label: str) -> "Condition":
        key = label.strip().upper()
        table = {c.label: c for c in CONDITIONS}
        if key not in table:
            raise ValueError(f"unknown condition {label!r}; expected one of "
                             f"{', '.join(sorted(table))}")
        return table[key]


CONDITIONS = (Condition(),
              Condition(grasp_force=True),
              Condition(tactile=True),
              Condition(grasp_force=True, tactile=True))


@dataclass(frozen=True)
class TrialConfig:
    mass: float            # kg
    target_angle: float    # degrees
    condition: Condition
    trial_index: int
    seed: int

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if not 0 < self.target_angle < 90:
            raise ValueError("target angle must be inside (0, 90) degrees")


@dataclass(frozen=True)
class TrialResult:
    config: TrialConfig
    final_angle: float       # degrees
    signed_error: float      # degrees, final - target
    angular_error: float     # degrees, |signed_error|
    completion_time: float   # seconds
    success: bool
    timeout: bool
    dropped: bool = False

    def __post_init__(self):
        if abs(self.angular_error - abs(self.signed_error)) > 1e-9:
            raise ValueError("angular_error must be |signed_error|")
        expect = self.angular_error < 10.0 and not self.timeout
        if self.success != expect:
            raise ValueError("success flag contradicts the error/timeout rule")


@dataclass(frozen=True)
class OperatorParams:
    reaction_delay: float = 0.15    # s
    gain: float = 1e-5              # m of extra opening per degree of commanded step
    observation_noise: float = 1.0  # degrees std
    stop_band: float = 2.0          # degrees

    def __post_init__(self):
        if self.reaction_delay < 0:
            raise ValueError("reaction_delay must be nonnegative")
        if self.stop_band <= 0:
            raise ValueError("stop_band must be positive")

    @classmethod
    def from_config(cls, cfg: OperatorConfig) -> "OperatorParams":
        return cls(reaction_delay=cfg.reaction_delay, gain=cfg.gain,
                   observation_noise=cfg.observation_noise,
                   stop_band=cfg.stop_band)

    @classmethod
    def ideal(cls) -> "OperatorParams":
        return cls(reaction_delay=0.0, observation_noise=0.0, stop_band=1.5)


def build_trial_schedule(condition: Condition, seed: int,
                         harness: HarnessConfig = HarnessConfig()
                         ) -> list[TrialConfig]:
    """Seeded random permutation of the mass x angle multiset (9 cases x 5)."""
    rng = random.Random(seed)
    cases = [(m, a) for m in harness.masses for a in harness.target_angles]
    deck = cases * harness.repetitions
    rng.shuffle(deck)
    return [TrialConfig(mass=m, target_angle=a, condition=condition,
                        trial_index=i + 1, seed=rng.getrandbits(32))
            for i, (m, a) in enumerate(deck)]


CONTROL_DT = 0.01

# operator state machine phases
_PULSE = "pulse"
_WAIT = "wait"
_DECIDE = "decide"

_SETTLE_PAD = 0.08      # s added to every wait for regrip ringdown
_PULSE_MIN = 0.01       # s
_PULSE_MAX = 0.15       # s
_T_UNIT_MIN = 0.004     # s per sqrt(deg)
_T_UNIT_MAX = 0.06      # s per sqrt(deg)


class ScriptedOperator:
    """Deterministic stand-in for the human subject.

    Ratchets the object toward the target: each cycle opens to just past
    the slip threshold (a hair deeper for larger steps), regrips firmly
    (only a firm grip arrests an already-slipping object, kinetic friction
    being weaker than static), and waits long enough for its feedback
    channels to show the result before deciding again. Slip distance under
    a near-threshold release grows like the square of the release window,
    so pulse length is planned as t_unit * sqrt(step) and t_unit self-tunes
    toward a per-cycle step of error/3, clamped to [0.3, 4] degrees.
    """

    def __init__(self, params: OperatorParams, obj: ObjectSpec,
                 phys: PhysicsConfig, harness: HarnessConfig,
                 condition: Condition):
        self.params = params
        self.obj = obj
        self.phys = phys
        self.cond = condition
        self.firm_aperture = self._aperture_for(
            harness.hold_safety * holding_force(obj, 0.0, phys))
        angle_lat = (harness.tactile_latency if condition.tactile
                     else harness.visual_latency)
        confirm = harness.force_latency if condition.grasp_force else angle_lat
        self.wait_time = params.reaction_delay + angle_lat + confirm + _SETTLE_PAD
        self.phase = _DECIDE
        self.cmd = self.firm_aperture
        self.t_unit = 0.02      # s per sqrt(deg), learned pulse-length scale
        self.pulse_len = self.t_unit
        self.pulse_left = 0.0
        self.wait_left = params.reaction_delay
        self.last_decide_theta: float | None = None
        self.last_desired: float | None = None
        self.done = False

    def _aperture_for(self, f_n: float) -> float:
        return self.obj.diameter - f_n / self.phys.contact_stiffness

    def _threshold_aperture(self, theta_deg: float) -> float:
        f_hold = holding_force(self.obj, math.radians(theta_deg), self.phys)
        return self._aperture_for(f_hold)

    def step(self, observed_theta: float, target: float,
             dt: float = CONTROL_DT) -> float:
        """One control tick: observed/target in degrees, returns aperture m."""
        if self.phase == _PULSE:
            self.pulse_left -= dt
            if self.pulse_left <= 0:
                self.phase = _WAIT
                self.wait_left = self.wait_time
                self.cmd = self.firm_aperture
            return self.cmd
        if self.phase == _WAIT:
            self.wait_left -= dt
            if self.wait_left <= 0:
                self.phase = _DECIDE
            return self.cmd

        error = target - observed_theta
        if error <= self.params.stop_band:
            # on target (or past it, which pivoting cannot undo): clamp firm
            self.done = True
            self.cmd = self.firm_aperture
            return self.cmd
        self.done = False
        desired = min(4.0, max(0.3, error / 3.0))
        if self.last_decide_theta is not None and self.last_desired is not None:
            achieved = observed_theta - self.last_decide_theta
            if achieved < 0.05:
                # grip force never crossed the slip threshold: pulse longer
                self.t_unit = min(_T_UNIT_MAX, self.t_unit * 1.5)
            else:
                # square-law slip: correct the time scale by the root of
                # the miss ratio, rate-limited against noise-driven jumps
                ratio = math.sqrt(self.last_desired / achieved)
                self.t_unit = min(_T_UNIT_MAX, max(_T_UNIT_MIN,
                                                   self.t_unit * min(1.4, max(0.6, ratio))))
        self.last_decide_theta = observed_theta
        self.last_desired = desired
        self.pulse_len = min(_PULSE_MAX, max(_PULSE_MIN,
                                             self.t_unit * math.sqrt(desired)))
        self.cmd = self._threshold_aperture(observed_theta) + self.params.gain * desired
        self.phase = _PULSE
        self.pulse_left = self.pulse_len
        return self.cmd

    def is_done(self) -> bool:
        return self.done


def scripted_operator_step(operator: ScriptedOperator, observed_theta: float,
                           target: float, dt: float = CONTROL_DT) -> float:
    return operator.step(observed_theta, target, dt)


class _DelayLine:
    """Fixed-rate delay buffer: value(t - latency) at tick resolution."""

    def __init__(self, latency: float, dt: float, initial: float):
        self.k = max(0, round(latency / dt))
        self.buf = [initial] * (self.k + 1)
        self.i = 0

    def push(self, value: float) -> float:
        out = self.buf[self.i]
        self.buf[self.i] = value
        self.i = (self.i + 1) % len(self.buf)
        return out


def run_trial(cfg: TrialConfig, operator=None,
              harness: HarnessConfig = HarnessConfig(),
              phys: PhysicsConfig = PhysicsConfig(),
              timeout: float | None = None,
              command_log: list | None = None,
              trace: list | None = None) -> TrialResult:
    """One closed-loop pivoting trial from a firm grasp at theta = 0.

    operator: OperatorParams (a ScriptedOperator is built), or any object
    with step(observed_theta, target, dt) -> aperture and is_done().
    command_log, when given, collects (tick, aperture) applied commands.
    trace collects per-tick (t, theta_deg, omega, F_n, mode, aperture).
    """
    if timeout is None:
        timeout = harness.timeout
    obj = ObjectSpec(mass=cfg.mass)
    sim = PivotSim(obj, phys)
    sim.grip_with_force(harness.hold_safety * holding_force(obj, 0.0, phys))
    if operator is None or isinstance(operator, OperatorParams):
        params = operator if isinstance(operator, OperatorParams) else OperatorParams()
        operator = ScriptedOperator(params, obj, phys, harness, cfg.condition)
        noise = params.observation_noise
    else:
        noise = 0.0
    rng = random.Random(cfg.seed)
    angle_lat = (harness.tactile_latency if cfg.condition.tactile
                 else harness.visual_latency)
    delay = _DelayLine(angle_lat, CONTROL_DT, math.degrees(sim.state.theta))

    t = 0.0
    prev_cmd: float | None = None
    last_change = 0.0
    stick_since: float | None = 0.0
    contact_lost_since: float | None = None
    dropped = False
    completion: float | None = None

    n_ticks = int(round(timeout / CONTROL_DT))
    for k in range(n_ticks):
        theta_deg = math.degrees(sim.state.theta)
        observed = delay.push(theta_deg)
        if noise > 0.0:
            observed += rng.gauss(0.0, noise)
        cmd = operator.step(observed, cfg.target_angle, CONTROL_DT)
        if prev_cmd is None or abs(cmd - prev_cmd) > 1e-12:
            last_change = t
            prev_cmd = cmd
        if command_log is not None:
            command_log.append((k, cmd))
        state = sim.step(cmd, CONTROL_DT)
        t = (k + 1) * CONTROL_DT
        if trace is not None:
            trace.append((t, math.degrees(state.theta), state.omega,
                          state.normal_force, state.mode.value, state.aperture))

        if state.mode is ContactMode.STICK:
            if stick_since is None:
                stick_since = t
        else:
            stick_since = None
        if state.normal_force <= 0.0:
            if contact_lost_since is None:
                contact_lost_since = t
            elif t - contact_lost_since >= harness.drop_window:
                dropped = True
        else:
            contact_lost_since = None

        if (operator.is_done() and stick_since is not None
                and t - max(stick_since, last_change) >= harness.stable_window):
            completion = max(stick_since, last_change)
            break

    timed_out = completion is None
    final = math.degrees(sim.state.theta)
    signed = final - cfg.target_angle
    err = abs(signed)
    return TrialResult(config=cfg, final_angle=final, signed_error=signed,
                       angular_error=err,
                       completion_time=timeout if timed_out else completion,
                       success=err < 10.0 and not timed_out,
                       timeout=timed_out, dropped=dropped)


def run_command_log(mass: float, commands: list, phys: PhysicsConfig = PhysicsConfig(),
                    harness: HarnessConfig = HarnessConfig()) -> float:
    """Replay an applied-command stream open-loop; returns final theta deg.

    Conditions never reach the physics, so identical logs must land at
    identical angles no matter which condition produced them.
    """
    obj = ObjectSpec(mass=mass)
    sim = PivotSim(obj, phys)
    sim.grip_with_force(harness.hold_safety * holding_force(obj, 0.0, phys))
    for _tick, cmd in commands:
        sim.step(cmd, CONTROL_DT)
    return math.degrees(sim.state.theta)


def run_protocol(master_seed: int, conditions=CONDITIONS,
                 operator_params: OperatorParams | None = None,
                 harness: HarnessConfig = HarnessConfig(),
                 phys: PhysicsConfig = PhysicsConfig(),
                 trace_hook=None) -> list[TrialResult]:
    """All conditions, one 45-trial schedule each, deterministic per seed.

    trace_hook(cfg), when given, returns a list to fill with that trial's
    per-tick trace (or None to skip it).
    """
    master = random.Random(master_seed)
    params = operator_params or OperatorParams()
    results = []
    for cond in conditions:
        schedule = build_trial_schedule(cond, master.getrandbits(32), harness)
        for cfg in schedule:
            trace = trace_hook(cfg) if trace_hook is not None else None
            results.append(run_trial(cfg, params, harness, phys, trace=trace))
    return results


@dataclass(frozen=True)
class SummaryStats:
    n: int
    successes: int
    success_ratio_pct: float
    mean_abs_error_deg: float
    std_abs_error_deg: float
    mean_time_s: float


def _stats(results: list[TrialResult]) -> SummaryStats:
    errs = [r.angular_error for r in results]
    succ = sum(1 for r in results if r.success)
    return SummaryStats(
        n=len(results), successes=succ,
        success_ratio_pct=100.0 * succ / len(results),
        mean_abs_error_deg=statistics.fmean(errs),
        std_abs_error_deg=statistics.pstdev(errs) if len(errs) > 1 else 0.0,
        mean_time_s=statistics.fmean(r.completion_time for r in results))


def aggregate(results: list[TrialResult]) -> dict:
    """Summary stats overall, per condition, per case, time per angle."""
    if not results:
        raise EmptyInput("no trial results to aggregate")
    by_condition: dict[str, list] = {}
    by_case: dict[str, list] = {}
    by_angle: dict[str, list] = {}
    for r in results:
        by_condition.setdefault(r.config.condition.label, []).append(r)
        case = f"{r.config.mass * 1000:g}g@{r.config.target_angle:g}deg"
        by_case.setdefault(case, []).append(r)
        by_angle.setdefault(f"{r.config.target_angle:g}", []).append(r)
    return {
        "overall": _stats(results),
        "by_condition": {k: _stats(v) for k, v in sorted(by_condition.items())},
        "by_case": {k: _stats(v) for k, v in sorted(by_case.items())},
        "mean_time_by_angle_s": {
            k: statistics.fmean(r.completion_time for r in v)
            for k, v in sorted(by_angle.items())},
    }


CSV_COLUMNS = ("condition", "trial_index", "mass_kg", "target_deg",
               "final_deg", "error_deg", "time_s", "success", "timeout")


def write_results_csv(path, results: list[TrialResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in results:
            w.writerow([r.config.condition.label, r.config.trial_index,
                        repr(r.config.mass), repr(r.config.target_angle),
                        repr(r.final_angle), repr(r.signed_error),
                        repr(r.completion_time),
                        "true" if r.success else "false",
                        "true" if r.timeout else "false"])


def write_summary_json(path, summary: dict) -> None:
    def plain(obj):
        if isinstance(obj, SummaryStats):
            return obj.__dict__
        if isinstance(obj, dict):
            return {k: plain(v) for k, v in obj.items()}
        return obj

    with open(path, "w") as fh:
        json.dump(plain(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
