// View model: the only state the renderer reads. Holds the last two
// snapshots for interpolation, watches the feed for silence, and keeps
// the trial banner. No client-side physics beyond that interpolation.
import { conditionFlags } from "./protocol.js";
export const CONNECTION_LOST_MS = 500;
export class ViewModel {
    latest = null;
    previous = null;
    latestArrivalMs = 0;
    prevArrivalMs = 0;
    trialStartT = 0;
    trialIndex = 0;
    trialMassKg = null;
    pushSnapshot(msg, nowMs) {
        if (this.latest && msg.sequence <= this.latest.sequence)
            return; // stale
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
    noteTrialStart(index, massKg) {
        this.trialIndex = index;
        this.trialMassKg = massKg;
    }
    hasState() {
        return this.latest !== null;
    }
    state() {
        if (!this.latest)
            throw new Error("no snapshot received yet");
        return this.latest;
    }
    connectionLost(nowMs) {
        if (!this.latest)
            return false; // never connected is "connecting", not lost
        return nowMs - this.latestArrivalMs > CONNECTION_LOST_MS;
    }
    /**
     * Object angle at wall time nowMs, linearly interpolated between the
     * last two snapshots by arrival time. Clamped: never extrapolates
     * past the newest snapshot.
     */
    objectAngleDeg(nowMs) {
        if (!this.latest)
            throw new Error("no snapshot received yet");
        if (!this.previous)
            return this.latest.object_angle_deg;
        const span = this.latestArrivalMs - this.prevArrivalMs;
        if (span <= 0)
            return this.latest.object_angle_deg;
        const u = Math.min(1, Math.max(0, (nowMs - this.prevArrivalMs) / span));
        return (this.previous.object_angle_deg +
            u * (this.latest.object_angle_deg - this.previous.object_angle_deg));
    }
    flags() {
        return conditionFlags(this.latest ? this.latest.condition : "VF");
    }
    banner() {
        if (!this.latest)
            return { status: "idle", caseLabel: "", elapsedS: 0 };
        const st = this.latest.trial_status;
        let label = "";
        if (st !== "idle" && this.trialIndex > 0) {
            const mass = this.trialMassKg !== null ? `${this.trialMassKg * 1000} g @ ` : "";
            label = `trial ${this.trialIndex}: ${mass}${this.latest.target_angle_deg} deg`;
        }
        return {
            status: st,
            caseLabel: label,
            elapsedS: st === "running" ? this.latest.t_s - this.trialStartT : 0,
        };
    }
}
