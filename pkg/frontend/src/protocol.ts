// Wire protocol for the teleop service: newline-delimited JSON text
// frames, same schema over raw TCP or a WebSocket text stream.

export interface StateMessage {
  type: "state";
  sequence: number;
  t_s: number;
  object_angle_deg: number;
  target_angle_deg: number;
  grip_force_n: number;
  fixture_force_n: number;
  aperture_m: number;
  tactors_mm: Record<string, [number, number]>;
  joints_deg: number[]; // index upper t1,t2, index lower, thumb upper, thumb lower
  condition: string;
  trial_status: "idle" | "running" | "done";
}

export interface AckMessage {
  type: "ack";
  kind: string;
  ok: boolean;
  applied: boolean;
  sequence: number;
  [extra: string]: unknown;
}

export interface ErrorMessage {
  type: "error";
  error: string;
  detail?: string;
}

export type ServerMessage = StateMessage | AckMessage | ErrorMessage;

export type CommandKind =
  | "aperture"
  | "start_trial"
  | "abort"
  | "set_condition"
  | "set_seed";

export interface CommandMessage {
  kind: CommandKind;
  client_time_s?: number;
  aperture_m?: number;
  condition?: string;
  seed?: number;
}

export function isStateMessage(msg: ServerMessage): msg is StateMessage {
  return msg.type === "state";
}

export function encodeCommand(cmd: CommandMessage): string {
  return JSON.stringify(cmd) + "\n";
}

/** Incremental parser for the newline-delimited JSON stream. */
export class LineCodec {
  private buffer = "";

  /** Feed a chunk, get every complete message it finishes. */
  feed(chunk: string): ServerMessage[] {
    this.buffer += chunk;
    const out: ServerMessage[] = [];
    let nl: number;
    while ((nl = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, nl).trim();
      this.buffer = this.buffer.slice(nl + 1);
      if (!line) continue;
      const parsed = JSON.parse(line) as ServerMessage;
      if (typeof parsed !== "object" || parsed === null || !("type" in parsed)) {
        throw new Error(`frame without a type: ${line.slice(0, 80)}`);
      }
      out.push(parsed);
    }
    return out;
  }

  pending(): number {
    return this.buffer.length;
  }
}

/** Condition label -> which feedback channels the UI should show. */
export function conditionFlags(label: string): {
  visual: boolean;
  graspForce: boolean;
  tactile: boolean;
} {
  const parts = label.split("+");
  return {
    visual: parts.includes("VF"),
    graspForce: parts.includes("GF"),
    tactile: parts.includes("TF"),
  };
}
