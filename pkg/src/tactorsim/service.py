"""Networked session layer: the whole rig behind one TCP port.

Wire protocol: JSON objects, one per frame. Writers emit newline-delimited
frames; readers accept both newline-delimited and 4-byte big-endian
length-prefixed frames, sniffed per frame (a length prefix under the 1 MB
cap always starts with a zero byte, which no JSON text can). The same
port answers plain HTTP GETs (static UI assets from --ui-dir) and RFC 6455
WebSocket upgrades carrying the identical JSON protocol in text frames,
so a browser needs no side channel. stdlib has no WebSocket support and
the common packages would drag an asyncio event loop into what is a
thread-per-client design, so the few frame/handshake lines live here.

Concurrency: one simulation thread owns every mutable simulation object.
Clients only enqueue commands (applied at the next tick boundary,
last-writer-wins per kind within a tick) and drain their own snapshot
queues (drop-oldest, so a stalled client never back-pressures the tick).
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import logging
import math
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .config import RigConfig
from .device import CONTROL_DT, DeviceSim
from .geometry import Point2, forward_kinematics
from .patterns import TactorPair
from .pivot import (ContactMode, ObjectSpec, PivotSim,
                    fixture_params_from_config, holding_force,
                    virtual_fixture_force)
from .trials import (CONDITIONS, Condition, TrialConfig, TrialResult,
                     build_trial_schedule, write_results_csv)

log = logging.getLogger("tactorsim.service")

_MAX_FRAME = 1 << 20
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

IDLE = "idle"
RUNNING = "running"
DONE = "done"

COMMAND_KINDS = ("set_seed", "set_condition", "abort", "start_trial",
                 "aperture")  # also the in-tick application order


class ServiceError(Exception):
    pass


class MalformedMessage(ServiceError):
    """Frame is not a JSON object of a known command schema."""


class IllegalTransition(ServiceError):
    """Lifecycle command not valid in the current trial_status."""


class StaleClient(ServiceError):
    """client_time regressed by more than a second; logged, never fatal."""


@dataclass(frozen=True)
class StateMessage:
    """One coherent simulation snapshot (all fields from the same tick)."""

    t: float                 # s
    object_angle: float      # degrees
    target_angle: float      # degrees
    grip_force: float        # N
    fixture_force: float     # N
    aperture: float          # m, follower jaw gap (gripper_track output)
    tactors: dict            # {"index_upper": (x, y), ...} mm
    joints: tuple            # 8 degrees: per station upper t1,t2 then lower
    condition: Condition
    trial_status: str
    sequence: int            # tick number; strictly increasing

    def to_wire(self) -> dict:
        return {
            "type": "state",
            "sequence": self.sequence,
            "t_s": self.t,
            "object_angle_deg": self.object_angle,
            "target_angle_deg": self.target_angle,
            "grip_force_n": self.grip_force,
            "fixture_force_n": self.fixture_force,
            "aperture_m": self.aperture,
            "tactors_mm": {k: [v[0], v[1]] for k, v in self.tactors.items()},
            "joints_deg": list(self.joints),
            "condition": self.condition.label,
            "trial_status": self.trial_status,
        }


def _validate(raw) -> tuple[str, dict]:
    """Schema check only; lifecycle legality is judged at apply time."""
    if not isinstance(raw, dict):
        raise MalformedMessage("frame must be a JSON object")
    kind = raw.get("kind")
    if kind not in COMMAND_KINDS:
        raise MalformedMessage(f"unknown kind {kind!r}")
    ct = raw.get("client_time_s", 0.0)
    if not isinstance(ct, (int, float)) or not math.isfinite(ct):
        raise MalformedMessage("client_time_s must be a finite number")
    payload = {"client_time_s": float(ct)}
    if kind == "aperture":
        ap = raw.get("aperture_m")
        if not isinstance(ap, (int, float)) or not math.isfinite(ap):
            raise MalformedMessage("aperture_m must be a finite number")
        if ap < 0:
            raise MalformedMessage("aperture_m must be >= 0")
        payload["aperture_m"] = float(ap)
    elif kind == "set_condition":
        try:
            payload["condition"] = Condition.parse(raw.get("condition", ""))
        except ValueError as exc:
            raise MalformedMessage(str(exc)) from None
    elif kind == "set_seed":
        seed = raw.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise MalformedMessage("seed must be a nonnegative integer")
        payload["seed"] = seed
    return kind, payload


class ServiceSim:
    """Deterministic core of a teleop session; no sockets, no wall clock.

    Owns the device sim, the grasp physics, the trial schedule and the
    command log. tick() advances everything by exactly one 10 ms step and
    returns the acks produced by commands applied at that boundary plus
    the snapshot, on snapshot ticks.
    """

    def __init__(self, rig: RigConfig | None = None, seed: int = 0,
                 condition: Condition = CONDITIONS[0]):
        self.rig = rig or RigConfig()
        self.seed = seed
        self.condition = condition
        self._seed0 = seed
        self._condition0 = condition
        self._fixture_force = 0.0
        self.device = DeviceSim(self.rig)
        self._homes = {
            name: (forward_kinematics(st.upper.geom, st.upper.home),
                   forward_kinematics(st.lower.geom, st.lower.home))
            for name, st in self.device.stations.items()}
        self._snap_every = max(1, round(self.rig.service.control_rate
                                        / self.rig.service.state_rate))
        self.tick_count = 0
        self.trial_status = IDLE
        self.schedule = build_trial_schedule(condition, seed, self.rig.harness)
        self.schedule_pos = 0
        self.results: list[TrialResult] = []
        self.command_log: list[dict] = []
        self._pending: list = []       # (client_id, kind, payload)
        self._pending_lock = threading.Lock()
        self._client_times: dict = {}
        self._stage_object(self.schedule[0])
        self._trial: TrialConfig | None = None
        self._trial_start = 0
        self._touched = False
        self._stick_since: int | None = 0
        self._last_change = 0
        self._lost_since: int | None = None
        self._dropped = False

    # -- session plumbing ------------------------------------------------

    def _stage_object(self, cfg: TrialConfig):
        obj = ObjectSpec(mass=cfg.mass)
        firm = self.rig.harness.hold_safety * holding_force(
            obj, 0.0, self.rig.physics)
        self.pivot = PivotSim(obj, self.rig.physics)
        self.pivot.grip_with_force(firm)
        self.firm_aperture = self.pivot.state.aperture
        self.held_cmd = self.firm_aperture
        self._prev_cmd = self.held_cmd
        self._fixture = fixture_params_from_config(self.rig.fixture,
                                                   engage_at=obj.diameter)
        self.target_angle = cfg.target_angle

    def handle_command(self, raw, client_id=0) -> None:
        """Validate and enqueue; raises MalformedMessage on bad schema.

        The ack (or IllegalTransition error) comes out of the next tick(),
        tagged with client_id, once the command has actually applied.
        """
        kind, payload = _validate(raw)
        with self._pending_lock:
            self._pending.append((client_id, kind, payload))

    def _drain_last_writer(self):
        with self._pending_lock:
            batch, self._pending = self._pending, []
        last = {}
        superseded = []
        for entry in batch:
            _cid, kind, _payload = entry
            if kind in last:
                superseded.append(last[kind])
            last[kind] = entry
        return last, superseded

    def _check_stale(self, client_id, payload) -> bool:
        ct = payload["client_time_s"]
        prev = self._client_times.get(client_id)
        self._client_times[client_id] = ct
        if prev is not None and ct < prev - 1.0:
            log.warning("%s", StaleClient(
                f"client {client_id}: time regressed {prev:.3f} -> {ct:.3f}"))
            return True
        return False

    def _apply(self, kind: str, payload: dict):
        """Mutate session state; raises IllegalTransition when not allowed."""
        if kind == "aperture":
            value = payload["aperture_m"]
            if abs(value - self.held_cmd) > 1e-12 and self.trial_status == RUNNING:
                self._last_change = self.tick_count
                self._touched = True
            self.held_cmd = value
            return {}
        if kind == "abort":
            if self.trial_status == RUNNING:
                self._trial = None
            self.trial_status = IDLE
            return {}
        if kind == "set_condition":
            if self.trial_status == RUNNING:
                raise IllegalTransition("set_condition only while idle")
            self.condition = payload["condition"]
            self.schedule = build_trial_schedule(self.condition, self.seed,
                                                 self.rig.harness)
            self.schedule_pos = 0
            self.trial_status = IDLE
            self._stage_object(self.schedule[0])
            return {}
        if kind == "set_seed":
            if self.trial_status == RUNNING:
                raise IllegalTransition("set_seed only while idle")
            self.seed = payload["seed"]
            self.schedule = build_trial_schedule(self.condition, self.seed,
                                                 self.rig.harness)
            self.schedule_pos = 0
            self.trial_status = IDLE
            self._stage_object(self.schedule[0])
            return {}
        # start_trial
        if self.trial_status == RUNNING:
            raise IllegalTransition("start_trial while running")
        if self.schedule_pos >= len(self.schedule):
            raise IllegalTransition("schedule complete; set_seed to restart")
        cfg = self.schedule[self.schedule_pos]
        self._stage_object(cfg)
        self._trial = cfg
        self._trial_start = self.tick_count
        self._touched = False
        self._stick_since = self.tick_count
        self._last_change = self.tick_count
        self._lost_since = None
        self._dropped = False
        self.trial_status = RUNNING
        return {"trial_index": cfg.trial_index, "mass_kg": cfg.mass,
                "target_deg": cfg.target_angle}

    def _finish_trial(self, timed_out: bool):
        cfg = self._trial
        harness = self.rig.harness
        final = math.degrees(self.pivot.state.theta)
        signed = final - cfg.target_angle
        if timed_out:
            completion = harness.timeout
        else:
            completion = (max(self._stick_since, self._last_change)
                          - self._trial_start) * CONTROL_DT
        self.results.append(TrialResult(
            config=cfg, final_angle=final, signed_error=signed,
            angular_error=abs(signed), completion_time=completion,
            success=abs(signed) < 10.0 and not timed_out,
            timeout=timed_out, dropped=self._dropped))
        self.trial_status = DONE
        self._trial = None
        self.schedule_pos += 1

    def _trial_accounting(self):
        harness = self.rig.harness
        state = self.pivot.state
        if state.mode is ContactMode.STICK:
            if self._stick_since is None:
                self._stick_since = self.tick_count
        else:
            self._stick_since = None
        if state.normal_force <= 0.0:
            if self._lost_since is None:
                self._lost_since = self.tick_count
            elif (self.tick_count - self._lost_since) * CONTROL_DT >= harness.drop_window:
                self._dropped = True
        else:
            self._lost_since = None
        elapsed = (self.tick_count - self._trial_start) * CONTROL_DT
        if elapsed >= harness.timeout:
            self._finish_trial(timed_out=True)
            return
        # the live analogue of the scripted operator's done signal: the
        # grip is clamped at least firm, the object sticks, and nothing
        # has been adjusted for a full stable window
        if (self._touched and self.held_cmd <= self.firm_aperture + 1e-6
                and self._stick_since is not None):
            quiet = self.tick_count - max(self._stick_since, self._last_change)
            if quiet * CONTROL_DT >= harness.stable_window:
                self._finish_trial(timed_out=False)

    def _device_targets(self):
        svc = self.rig.service
        if not (self.condition.tactile and self.trial_status == RUNNING):
            return {name: TactorPair(upper=up, lower=lo)
                    for name, (up, lo) in self._homes.items()}
        # twist rendering: each tactor rides a circle through its home,
        # upper and lower in counter-phase, angle tracking the object
        phi = math.radians(svc.sync_gain * math.degrees(self.pivot.state.theta))
        r = svc.sync_radius
        off_u = Point2(r * (math.cos(phi) - 1.0), r * math.sin(phi))
        off_l = Point2(r * (math.cos(phi) - 1.0), -r * math.sin(phi))
        return {name: TactorPair(upper=up + off_u, lower=lo + off_l)
                for name, (up, lo) in self._homes.items()}

    # -- the tick --------------------------------------------------------

    def tick(self):
        """One 10 ms step; returns (acks, snapshot-or-None).

        acks is a list of (client_id, dict) in application order.
        """
        acks = []
        last, superseded = self._drain_last_writer()
        for cid, kind, payload in superseded:
            acks.append((cid, {"type": "ack", "kind": kind, "ok": True,
                               "applied": False, "superseded": True,
                               "sequence": self.tick_count}))
        for kind in COMMAND_KINDS:
            if kind not in last:
                continue
            cid, _k, payload = last[kind]
            stale = self._check_stale(cid, payload)
            try:
                extra = self._apply(kind, payload)
            except IllegalTransition as exc:
                ack = {"type": "error", "error": "illegal_transition",
                       "kind": kind, "detail": str(exc),
                       "sequence": self.tick_count}
            else:
                ack = {"type": "ack", "kind": kind, "ok": True,
                       "applied": True, "sequence": self.tick_count, **extra}
                entry = {"tick": self.tick_count, "kind": kind,
                         **{k: v for k, v in payload.items()
                            if k != "client_time_s"}}
                if kind == "set_condition":
                    entry["condition"] = payload["condition"].label
                self.command_log.append(entry)
            if stale:
                ack["stale_client"] = True
            acks.append((cid, ack))

        xdot = (self.held_cmd - self._prev_cmd) / CONTROL_DT
        self._prev_cmd = self.held_cmd
        self.pivot.step(self.held_cmd, CONTROL_DT)
        self.device.tick(self._device_targets())
        self.tick_count += 1
        self._fixture_force = virtual_fixture_force(self.held_cmd, xdot,
                                                    self._fixture)
        if self.trial_status == RUNNING:
            self._trial_accounting()

        snap = None
        if self.tick_count % self._snap_every == 0:
            snap = self.snapshot_state()
        return acks, snap

    def snapshot_state(self) -> StateMessage:
        tactors = {}
        joints = []
        for name in self.device.stations:
            st = self.device.state.stations[name]
            for level, mech in (("upper", st.upper), ("lower", st.lower)):
                tactors[f"{name}_{level}"] = (mech.tactor.x, mech.tactor.y)
                joints.append(math.degrees(mech.theta_actual.theta1))
                joints.append(math.degrees(mech.theta_actual.theta2))
        return StateMessage(
            t=self.tick_count * CONTROL_DT,
            object_angle=math.degrees(self.pivot.state.theta),
            target_angle=self.target_angle,
            grip_force=self.pivot.state.normal_force,
            fixture_force=getattr(self, "_fixture_force", 0.0),
            aperture=self.pivot.state.aperture,
            tactors=tactors, joints=tuple(joints),
            condition=self.condition, trial_status=self.trial_status,
            sequence=self.tick_count)

    # -- record / replay -------------------------------------------------

    def write_command_log(self, path):
        with open(path, "w") as fh:
            fh.write(json.dumps({"format": "tactorsim-commands", "version": 1,
                                 "seed": self._seed0,
                                 "condition": self._condition0.label}) + "\n")
            for entry in self.command_log:
                fh.write(json.dumps(entry) + "\n")
            fh.write(json.dumps({"end_tick": self.tick_count}) + "\n")

    def write_results_csv(self, path):
        write_results_csv(path, self.results)


def replay_command_log(path, rig: RigConfig | None = None) -> ServiceSim:
    """Re-run a recorded session tick-for-tick; returns the finished sim.

    Commands are applied at exactly their recorded tick stamps, so with
    the same seed the trial results (and their CSV) come out identical to
    the live session's.
    """
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("format") != "tactorsim-commands":
        raise MalformedMessage(f"{path} is not a command log")
    header = lines[0]
    footer = lines[-1]
    if "end_tick" not in footer:
        raise MalformedMessage("command log is truncated (no end_tick)")
    entries = lines[1:-1]
    sim = ServiceSim(rig, seed=header["seed"],
                     condition=Condition.parse(header["condition"]))
    by_tick: dict[int, list] = {}
    for e in entries:
        by_tick.setdefault(e["tick"], []).append(e)
    for k in range(footer["end_tick"]):
        for e in by_tick.get(k, ()):
            msg = {key: val for key, val in e.items() if key != "tick"}
            sim.handle_command(msg)
        sim.tick()
    return sim


# -- wire framing ---------------------------------------------------------


class _FrameReader:
    """Buffered JSON frame reader accepting both framings per frame."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buf = b""

    def _fill(self) -> bool:
        try:
            chunk = self.sock.recv(65536)
        except OSError:
            return False
        if not chunk:
            return False
        self.buf += chunk
        return True

    def read_frame(self):
        """Next JSON value, or None at EOF. Raises MalformedMessage."""
        while True:
            self.buf = self.buf.lstrip(b"\r\n \t")
            if self.buf:
                if self.buf[0:1] == b"\x00":             # length-prefixed
                    if len(self.buf) >= 4:
                        n = struct.unpack(">I", self.buf[:4])[0]
                        if n > _MAX_FRAME:
                            raise MalformedMessage("frame too large")
                        if len(self.buf) >= 4 + n:
                            payload = self.buf[4:4 + n]
                            self.buf = self.buf[4 + n:]
                            return _parse_json(payload)
                elif self.buf[0:1] == b"{":              # line-delimited
                    nl = self.buf.find(b"\n")
                    if nl >= 0:
                        payload = self.buf[:nl]
                        self.buf = self.buf[nl + 1:]
                        return _parse_json(payload)
                    if len(self.buf) > _MAX_FRAME:
                        raise MalformedMessage("frame too large")
                else:
                    raise MalformedMessage("frame must be JSON text or "
                                           "length-prefixed JSON")
            if not self._fill():
                return None


def _parse_json(payload: bytes):
    try:
        return json.loads(payload)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedMessage(f"bad JSON frame: {exc}") from None


# -- minimal RFC 6455 (text frames only, no fragmentation) -----------------


def _ws_accept(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _ws_encode_text(text: str) -> bytes:
    data = text.encode()
    n = len(data)
    if n < 126:
        head = struct.pack(">BB", 0x81, n)
    elif n < 1 << 16:
        head = struct.pack(">BBH", 0x81, 126, n)
    else:
        head = struct.pack(">BBQ", 0x81, 127, n)
    return head + data


class _WsReader:
    def __init__(self, sock: socket.socket, leftover: bytes = b""):
        self.sock = sock
        self.buf = leftover

    def _need(self, n: int) -> bool:
        while len(self.buf) < n:
            try:
                chunk = self.sock.recv(65536)
            except OSError:
                return False
            if not chunk:
                return False
            self.buf += chunk
        return True

    def read_message(self):
        """Next text payload as str; None on close/EOF."""
        while True:
            if not self._need(2):
                return None
            b0, b1 = self.buf[0], self.buf[1]
            opcode = b0 & 0x0F
            masked = bool(b1 & 0x80)
            n = b1 & 0x7F
            off = 2
            if n == 126:
                if not self._need(4):
                    return None
                n = struct.unpack(">H", self.buf[2:4])[0]
                off = 4
            elif n == 127:
                if not self._need(10):
                    return None
                n = struct.unpack(">Q", self.buf[2:10])[0]
                off = 10
            if n > _MAX_FRAME:
                return None
            if masked:
                if not self._need(off + 4 + n):
                    return None
                mask = self.buf[off:off + 4]
                raw = bytes(c ^ mask[i % 4] for i, c in
                            enumerate(self.buf[off + 4:off + 4 + n]))
                self.buf = self.buf[off + 4 + n:]
            else:
                if not self._need(off + n):
                    return None
                raw = self.buf[off:off + n]
                self.buf = self.buf[off + n:]
            if opcode == 0x8:                    # close
                return None
            if opcode == 0x9:                    # ping -> pong
                try:
                    self.sock.sendall(struct.pack(">BB", 0x8A, len(raw)) + raw)
                except OSError:
                    return None
                continue
            if opcode == 0xA:                    # pong
                continue
            if opcode != 0x1 or not (b0 & 0x80):
                return None                      # no binary/fragmentation
            return raw.decode(errors="replace")


# -- per-client session ----------------------------------------------------


class _Client:
    _SNAP_DEPTH = 4

    def __init__(self, cid: int, sock: socket.socket, ws: bool):
        self.cid = cid
        self.sock = sock
        self.ws = ws
        self.lock = threading.Lock()
        self.control: list[str] = []
        self.snaps: deque[str] = deque(maxlen=self._SNAP_DEPTH)
        self.wake = threading.Event()
        self.alive = True
        self.writer = threading.Thread(target=self._write_loop, daemon=True)
        self.writer.start()

    def enqueue_control(self, msg: dict):
        with self.lock:
            self.control.append(json.dumps(msg))
        self.wake.set()

    def enqueue_snapshot(self, wire: str):
        with self.lock:
            self.snaps.append(wire)       # maxlen: oldest falls out
        self.wake.set()

    def flush(self, timeout: float = 0.5):
        """Give the writer a chance to drain before a deliberate close."""
        end = time.monotonic() + timeout
        while time.monotonic() < end:
            with self.lock:
                if not self.control and not self.snaps:
                    return
            time.sleep(0.01)

    def _write_loop(self):
        while self.alive:
            self.wake.wait(timeout=0.5)
            self.wake.clear()
            while True:
                with self.lock:
                    if self.control:
                        item = self.control.pop(0)
                    elif self.snaps:
                        item = self.snaps.popleft()
                    else:
                        break
                try:
                    if self.ws:
                        self.sock.sendall(_ws_encode_text(item))
                    else:
                        self.sock.sendall(item.encode() + b"\n")
                except OSError:
                    self.alive = False
                    return

    def close(self):
        self.alive = False
        self.wake.set()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


_CONTENT_TYPES = {".html": "text/html; charset=utf-8",
                  ".js": "text/javascript; charset=utf-8",
                  ".mjs": "text/javascript; charset=utf-8",
                  ".css": "text/css; charset=utf-8",
                  ".json": "application/json",
                  ".svg": "image/svg+xml",
                  ".png": "image/png",
                  ".ico": "image/x-icon",
                  ".map": "application/json"}


def _device_log_header(sim: ServiceSim) -> list[str]:
    cols = ["t_s"]
    for name in sim.device.stations:
        for mech in ("upper", "lower"):
            p = f"{name}_{mech}"
            cols += [f"{p}_theta1_tgt_deg", f"{p}_theta2_tgt_deg",
                     f"{p}_theta1_deg", f"{p}_theta2_deg",
                     f"{p}_x_mm", f"{p}_y_mm"]
        cols += [f"{name}_arbitration", f"{name}_clearance_mm"]
    return cols


def _device_log_row(sim: ServiceSim) -> list:
    st = sim.device.state
    row = [f"{st.time:.2f}"]
    for name in sim.device.stations:
        s = st.stations[name]
        for m in (s.upper, s.lower):
            row += [f"{math.degrees(m.theta_target.theta1):.6f}",
                    f"{math.degrees(m.theta_target.theta2):.6f}",
                    f"{math.degrees(m.theta_actual.theta1):.6f}",
                    f"{math.degrees(m.theta_actual.theta2):.6f}",
                    f"{m.tactor.x:.6f}", f"{m.tactor.y:.6f}"]
        row += ["true" if s.arbitration_active else "false",
                f"{s.clearance:.6f}"]
    return row


class TeleopServer:
    """Thread-per-client TCP server around one ServiceSim.

    speed "real" paces the loop at the control rate; "fast" ticks flat
    out (replay, tests). max_ticks, when set, stops the loop after that
    many ticks; otherwise it runs until stop().
    """

    def __init__(self, rig: RigConfig | None = None, seed: int = 0,
                 condition: Condition = CONDITIONS[0],
                 host: str = "127.0.0.1", port: int = 0,
                 speed: str = "real", ui_dir=None, record_path=None,
                 max_ticks: int | None = None, device_log=None):
        if speed not in ("real", "fast"):
            raise ValueError("speed must be 'real' or 'fast'")
        self.sim = ServiceSim(rig, seed=seed, condition=condition)
        self.host = host
        self.port = port
        self.speed = speed
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self.record_path = record_path
        self.max_ticks = max_ticks
        self.device_log = device_log
        self._device_log_fh = None
        self._device_log_writer = None
        self._clients: dict[int, _Client] = {}
        self._clients_lock = threading.Lock()
        self._next_cid = 1
        self._stop = threading.Event()
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []

    # -- lifecycle --------------------------------------------------------

    def start(self) -> "TeleopServer":
        self._listener = socket.create_server((self.host, self.port))
        self.port = self._listener.getsockname()[1]
        if self.device_log:
            self._device_log_fh = open(self.device_log, "w", newline="")
            self._device_log_writer = csv.writer(self._device_log_fh)
            self._device_log_writer.writerow(_device_log_header(self.sim))
        self._threads = [threading.Thread(target=self._accept_loop, daemon=True),
                         threading.Thread(target=self._sim_loop, daemon=True)]
        for t in self._threads:
            t.start()
        return self

    def stop(self):
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=2.0)
        with self._clients_lock:
            clients, self._clients = list(self._clients.values()), {}
        for c in clients:
            c.close()
        if self.record_path:
            self.sim.write_command_log(self.record_path)
        if self._device_log_fh is not None:
            self._device_log_fh.close()
            self._device_log_fh = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the sim loop finishes (max_ticks) or timeout."""
        return self._stop.wait(timeout)

    # -- simulation thread -------------------------------------------------

    def _sim_loop(self):
        dt = CONTROL_DT
        t0 = time.monotonic()
        k = 0
        while not self._stop.is_set():
            if self.max_ticks is not None and k >= self.max_ticks:
                self._stop.set()
                break
            acks, snap = self.sim.tick()
            k += 1
            if self._device_log_writer is not None:
                self._device_log_writer.writerow(_device_log_row(self.sim))
            if acks or snap is not None:
                wire = json.dumps(snap.to_wire()) if snap is not None else None
                with self._clients_lock:
                    clients = dict(self._clients)
                for cid, msg in acks:
                    c = clients.get(cid)
                    if c is not None:
                        c.enqueue_control(msg)
                if wire is not None:
                    for c in clients.values():
                        c.enqueue_snapshot(wire)
            if self.speed == "real":
                target = t0 + k * dt
                now = time.monotonic()
                if now < target:
                    time.sleep(target - now)
                elif now - target > 0.25:
                    log.warning("sim loop behind by %.3f s; rebasing",
                                now - target)
                    t0 = now - k * dt

    # -- network threads ----------------------------------------------------

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _addr = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_conn, args=(conn,),
                             daemon=True).start()

    def _serve_conn(self, conn: socket.socket):
        # sniff the protocol; a silent peer is a plain JSON subscriber
        conn.settimeout(0.3)
        try:
            head = conn.recv(4, socket.MSG_PEEK)
        except TimeoutError:
            head = b""
        except OSError:
            conn.close()
            return
        conn.settimeout(None)
        if head[:4] in (b"GET ", b"HEAD", b"POST", b"PUT ") or \
                head[:3] == b"OPT":
            self._serve_http(conn)
        else:
            self._serve_json(conn, ws=False, reader=_FrameReader(conn))

    def _register(self, conn: socket.socket, ws: bool) -> _Client:
        with self._clients_lock:
            cid = self._next_cid
            self._next_cid += 1
            client = _Client(cid, conn, ws=ws)
            self._clients[cid] = client
        return client

    def _unregister(self, client: _Client):
        with self._clients_lock:
            self._clients.pop(client.cid, None)
        client.close()

    def _serve_json(self, conn, ws: bool, reader):
        client = self._register(conn, ws=ws)
        try:
            while not self._stop.is_set():
                if ws:
                    text = reader.read_message()
                    if text is None:
                        return
                    try:
                        raw = _parse_json(text.encode())
                    except MalformedMessage as exc:
                        client.enqueue_control({"type": "error",
                                                "error": "malformed",
                                                "detail": str(exc)})
                        continue
                else:
                    try:
                        raw = reader.read_frame()
                    except MalformedMessage as exc:
                        client.enqueue_control({"type": "error",
                                                "error": "malformed",
                                                "detail": str(exc)})
                        client.flush()
                        return   # framing is unrecoverable on a byte stream
                    if raw is None:
                        return
                try:
                    self.sim.handle_command(raw, client.cid)
                except MalformedMessage as exc:
                    client.enqueue_control({"type": "error",
                                            "error": "malformed",
                                            "detail": str(exc)})
        finally:
            self._unregister(client)

    # -- http / websocket ----------------------------------------------------

    def _serve_http(self, conn: socket.socket):
        buf = b""
        try:
            while b"\r\n\r\n" not in buf:
                chunk = conn.recv(65536)
                if not chunk:
                    conn.close()
                    return
                buf += chunk
                if len(buf) > _MAX_FRAME:
                    conn.close()
                    return
        except OSError:
            conn.close()
            return
        head, _, leftover = buf.partition(b"\r\n\r\n")
        lines = head.decode(errors="replace").split("\r\n")
        try:
            method, path, _version = lines[0].split(" ", 2)
        except ValueError:
            conn.close()
            return
        headers = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()

        if headers.get("upgrade", "").lower() == "websocket":
            key = headers.get("sec-websocket-key", "")
            if not key:
                self._http_response(conn, 400, b"missing websocket key")
                return
            accept = _ws_accept(key)
            conn.sendall(("HTTP/1.1 101 Switching Protocols\r\n"
                          "Upgrade: websocket\r\n"
                          "Connection: Upgrade\r\n"
                          f"Sec-WebSocket-Accept: {accept}\r\n"
                          "\r\n").encode())
            self._serve_json(conn, ws=True,
                             reader=_WsReader(conn, leftover=leftover))
            return
        if method not in ("GET", "HEAD"):
            self._http_response(conn, 405, b"method not allowed")
            return
        self._serve_static(conn, method, path.split("?", 1)[0])

    def _serve_static(self, conn, method: str, path: str):
        if self.ui_dir is None:
            self._http_response(conn, 404, b"no ui assets configured")
            return
        rel = path.lstrip("/") or "index.html"
        full = (self.ui_dir / rel).resolve()
        if not str(full).startswith(str(self.ui_dir)) or not full.is_file():
            self._http_response(conn, 404, b"not found")
            return
        body = full.read_bytes()
        ctype = _CONTENT_TYPES.get(full.suffix, "application/octet-stream")
        self._http_response(conn, 200, b"" if method == "HEAD" else body,
                            ctype=ctype, length=len(body))

    @staticmethod
    def _http_response(conn, status: int, body: bytes,
                       ctype: str = "text/plain; charset=utf-8",
                       length: int | None = None):
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found",
                  405: "Method Not Allowed"}.get(status, "Error")
        head = (f"HTTP/1.1 {status} {reason}\r\n"
                f"Content-Type: {ctype}\r\n"
                f"Content-Length: {length if length is not None else len(body)}\r\n"
                "Connection: close\r\n\r\n")
        try:
            conn.sendall(head.encode() + body)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass
