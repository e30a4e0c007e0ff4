// Aperture input: slider fraction or arrow keys to meters, rate-limited
// last-writer command emission toward the service.
export const APERTURE_MAX_M = 0.03; // slider full scale, 30 mm
export const ARROW_STEP_M = 0.0002; // 0.2 mm per key press
export const MAX_RATE_HZ = 60;
/** Monotone slider mapping; 0 -> closed, 1 -> 30 mm open. */
export function sliderToAperture(fraction) {
    const f = Math.min(1, Math.max(0, fraction));
    return f * APERTURE_MAX_M;
}
export function apertureToSlider(aperture) {
    return Math.min(1, Math.max(0, aperture / APERTURE_MAX_M));
}
export function arrowStep(aperture, direction) {
    return Math.min(APERTURE_MAX_M, Math.max(0, aperture + direction * ARROW_STEP_M));
}
/**
 * Last-writer rate limiter: absorb arbitrarily fast input, emit at most
 * MAX_RATE_HZ commands, always with the newest value. A value arriving
 * inside the dead time is held and flushed when the window reopens.
 */
export class CommandGate {
    lastSentMs = -Infinity;
    pendingValue = null;
    intervalMs;
    sent = []; // test hook; main.ts drains via onSend
    onSend = null;
    /** aperture commands only go out while a trial runs */
    trialStatus = "idle";
    constructor(maxRateHz = MAX_RATE_HZ) {
        this.intervalMs = 1000 / maxRateHz;
    }
    offer(aperture, nowMs) {
        if (this.trialStatus === "idle") {
            this.pendingValue = null; // suppressed: trial controls only while idle
            return false;
        }
        this.pendingValue = aperture;
        return this.flush(nowMs);
    }
    /** Send the held value if the rate window allows; true when sent. */
    flush(nowMs) {
        if (this.pendingValue === null)
            return false;
        if (nowMs - this.lastSentMs < this.intervalMs)
            return false;
        const cmd = {
            kind: "aperture",
            aperture_m: this.pendingValue,
            client_time_s: nowMs / 1000,
        };
        this.pendingValue = null;
        this.lastSentMs = nowMs;
        this.sent.push(cmd);
        if (this.onSend)
            this.onSend(cmd);
        return true;
    }
    hasPending() {
        return this.pendingValue !== null;
    }
}
