// View model: the only state the renderer reads. Holds the last two
// snapshots for interpolation, watches the feed for silence, and keeps
// the trial banner. No client-side physics beyond that interpolation.

import { StateMessage, conditionFlags } from "./protocol.js";

export const CONNECTION_LOST_MS = 500;

export interface TrialBanner {
  status: "idle" | "running" | "done";
  caseLabel: string; // e.g. "trial 3: 10 g @ 45 deg"
  elapsedS: number;
}

export class ViewModel {
  private latest: StateMessage | null = null;
  private previous: StateMessage | null = null;
  private latestArrivalMs = 0;
  private prevArrivalMs = 0;
  private trialStartT = 0;
  private trialIndex = 0;
  private trialMassKg: number | null = null;

  pushSnapshot(msg: StateMessage, nowMs: number): void {
    if (this.latest && msg.sequence <= this.latest.sequence) return; // stale
    if (this.latest && this.latest.trial_status !== "running"
        && msg.trial_status === "running") {
      this.trialStartT = msg.t_s;
    }
    this.previous = this.latest;
    this.prevArrivalMs = this.latestArrivalMs;
    this.latest = msg;
    this.latestArrivalMs = nowMs;
  }

  /** Trial metadata arrives on the start_trial ack, not in snapshots. */
  noteTrialStart(index: number, massKg: number): void {
    this.trialIndex = index;
    this.trialMassKg = massKg;
  }

  hasState(): boolean {
    return this.latest !== null;
  }

  state(): StateMessage {
    if (!this.latest) throw new Error("no snapshot received yet");
    return this.latest;
  }

  connectionLost(nowMs: number): boolean {
    if (!this.latest) return false; // never connected is "connecting", not lost
    return nowMs - this.latestArrivalMs > CONNECTION_LOST_MS;
  }

  /**
   * Object angle at wall time nowMs, linearly interpolated between the
   * last two snapshots by arrival time. Clamped: never extrapolates
   * past the newest snapshot.
   */
  objectAngleDeg(nowMs: number): number {
    if (!this.latest) throw new Error("no snapshot received yet");
    if (!this.previous) return this.latest.object_angle_deg;
    const span = this.latestArrivalMs - this.prevArrivalMs;
    if (span <= 0) return this.latest.object_angle_deg;
    const u = Math.min(1, Math.max(0, (nowMs - this.prevArrivalMs) / span));
    return (
      this.previous.object_angle_deg +
      u * (this.latest.object_angle_deg - this.previous.object_angle_deg)
    );
  }

  flags() {
    return conditionFlags(this.latest ? this.latest.condition : "VF");
  }

  banner(): TrialBanner {
    if (!this.latest) return { status: "idle", caseLabel: "", elapsedS: 0 };
    const st = this.latest.trial_status;
    let label = "";
    if (st !== "idle" && this.trialIndex > 0) {
      const mass =
        this.trialMassKg !== null ? `${this.trialMassKg * 1000} g @ ` : "";
      label = `trial ${this.trialIndex}: ${mass}${this.latest.target_angle_deg} deg`;
    }
    return {
      status: st,
      caseLabel: label,
      elapsedS: st === "running" ? this.latest.t_s - this.trialStartT : 0,
    };
  }
}
