// Wire protocol for the teleop service: newline-delimited JSON text
// frames, same schema over raw TCP or a WebSocket text stream.
export function isStateMessage(msg) {
    return msg.type === "state";
}
export function encodeCommand(cmd) {
    return JSON.stringify(cmd) + "\n";
}
/** Incremental parser for the newline-delimited JSON stream. */
export class LineCodec {
    buffer = "";
    /** Feed a chunk, get every complete message it finishes. */
    feed(chunk) {
        this.buffer += chunk;
        const out = [];
        let nl;
        while ((nl = this.buffer.indexOf("\n")) >= 0) {
            const line = this.buffer.slice(0, nl).trim();
            this.buffer = this.buffer.slice(nl + 1);
            if (!line)
                continue;
            const parsed = JSON.parse(line);
            if (typeof parsed !== "object" || parsed === null || !("type" in parsed)) {
                throw new Error(`frame without a type: ${line.slice(0, 80)}`);
            }
            out.push(parsed);
        }
        return out;
    }
    pending() {
        return this.buffer.length;
    }
}
/** Condition label -> which feedback channels the UI should show. */
export function conditionFlags(label) {
    const parts = label.split("+");
    return {
        visual: parts.includes("VF"),
        graspForce: parts.includes("GF"),
        tactile: parts.includes("TF"),
    };
}
