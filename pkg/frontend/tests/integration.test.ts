// End-to-end against the real service: spawn `tactorsim serve` at real
// speed, speak newline JSON over TCP and drive a full trial the way the
// UI would. The WebSocket upgrade itself is covered by the service's
// own test suite; the payload schema is identical on both framings.

import { ChildProcess, spawn } from "node:child_process";
import net from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  AckMessage,
  CommandMessage,
  encodeCommand,
  isStateMessage,
  LineCodec,
  ServerMessage,
  StateMessage,
} from "../src/protocol.js";

const repoRoot = join(dirname(fileURLToPath(import.meta.url)), "..", "..");

let server: ChildProcess;
let port = 0;

class WireClient {
  private sock: net.Socket;
  private codec = new LineCodec();
  private queue: ServerMessage[] = [];
  private waiters: (() => void)[] = [];
  private t0 = Date.now();

  constructor(sock: net.Socket) {
    this.sock = sock;
    sock.setNoDelay(true);
    sock.on("data", (chunk) => {
      this.queue.push(...this.codec.feed(chunk.toString("utf8")));
      for (const w of this.waiters.splice(0)) w();
    });
  }

  static connect(p: number): Promise<WireClient> {
    return new Promise((resolve, reject) => {
      const sock = net.createConnection({ host: "127.0.0.1", port: p }, () =>
        resolve(new WireClient(sock)),
      );
      sock.on("error", reject);
    });
  }

  send(cmd: CommandMessage): void {
    this.sock.write(
      encodeCommand({ client_time_s: (Date.now() - this.t0) / 1000, ...cmd }),
    );
  }

  /** Next message matching pred, consuming everything before it. */
  async next<T extends ServerMessage>(
    pred: (m: ServerMessage) => m is T,
    timeoutMs = 5000,
  ): Promise<T> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      while (this.queue.length > 0) {
        const msg = this.queue.shift()!;
        if (pred(msg)) return msg;
      }
      const left = deadline - Date.now();
      if (left <= 0) throw new Error("timed out waiting for a message");
      await new Promise<void>((resolve) => {
        const t = setTimeout(resolve, left);
        this.waiters.push(() => {
          clearTimeout(t);
          resolve();
        });
      });
    }
  }

  close(): void {
    this.sock.destroy();
  }
}

const isState = (m: ServerMessage): m is StateMessage => isStateMessage(m);
const isAck =
  (kind: string) =>
  (m: ServerMessage): m is AckMessage =>
    m.type === "ack" && (m as AckMessage).kind === kind;

beforeAll(async () => {
  server = spawn(
    "python3",
    // -u: the banner with the bound port must not sit in a pipe buffer
    ["-u", "-m", "tactorsim.cli", "serve", "--port", "0", "--speed", "real", "--seed", "5"],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  let errText = "";
  server.stderr!.on("data", (c) => (errText += c.toString()));
  port = await new Promise<number>((resolve, reject) => {
    let out = "";
    const timer = setTimeout(
      () => reject(new Error(`server never came up\n${errText}`)),
      15000,
    );
    server.stdout!.on("data", (chunk) => {
      out += chunk.toString();
      const m = out.match(/serving on 127\.0\.0\.1:(\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(Number(m[1]));
      }
    });
    server.on("exit", () =>
      reject(new Error(`server exited early\n${errText}`)),
    );
  });
}, 20000);

afterAll(() => {
  if (server && server.exitCode === null) server.kill("SIGINT");
});

describe("teleop service over the wire", () => {
  it("streams snapshots at 45+ per second at real speed", async () => {
    const client = await WireClient.connect(port);
    try {
      const first = await client.next(isState);
      const t0 = Date.now();
      let count = 0;
      let lastSeq = first.sequence;
      while (Date.now() - t0 < 1200) {
        const s = await client.next(isState);
        expect(s.sequence).toBeGreaterThan(lastSeq);
        lastSeq = s.sequence;
        count += 1;
      }
      const rate = count / ((Date.now() - t0) / 1000);
      expect(rate).toBeGreaterThanOrEqual(45);
      // schema spot checks on a live frame
      expect(first.joints_deg).toHaveLength(8);
      expect(Object.keys(first.tactors_mm).sort()).toEqual([
        "index_lower",
        "index_upper",
        "thumb_lower",
        "thumb_upper",
      ]);
      expect(first.trial_status).toBe("idle");
    } finally {
      client.close();
    }
  }, 15000);

  it("answers an unknown command kind with an error frame, stream intact", async () => {
    const client = await WireClient.connect(port);
    try {
      client.send({ kind: "wiggle" as never });
      const err = await client.next(
        (m): m is ServerMessage => m.type === "error",
      );
      expect((err as { error: string }).error).toBe("malformed");
      await client.next(isState); // still serving states afterwards
    } finally {
      client.close();
    }
  }, 15000);

  it("runs a complete trial: start, ratchet open, regrip, done inside the band", async () => {
    const client = await WireClient.connect(port);
    try {
      client.send({ kind: "start_trial" });
      const ack = await client.next(isAck("start_trial"));
      expect(ack.ok).toBe(true);
      expect(ack.applied).toBe(true);
      const target = ack["target_deg"] as number;
      const mass = ack["mass_kg"] as number;
      expect(ack["trial_index"]).toBe(1);
      expect(target).toBe(25);
      expect(mass).toBeCloseTo(0.005, 12);

      // UI-style ratchet: ease the grip until the cylinder pivots, then
      // squeeze firmly short of the target and let it settle
      let s = await client.next(isState);
      const deadline = Date.now() + 25000;
      while (s.trial_status !== "done") {
        if (Date.now() > deadline) throw new Error("trial never finished");
        if (s.trial_status === "running") {
          // creep slowly near the target so the regrip catches the
          // cylinder before momentum carries it past the band
          const gap = target - s.object_angle_deg;
          const cmd =
            gap > 6 ? s.aperture_m + (gap > 16 ? 5e-5 : 1e-5) : 0.0105;
          client.send({ kind: "aperture", aperture_m: cmd });
        }
        s = await client.next(isState);
      }
      expect(Math.abs(s.object_angle_deg - target)).toBeLessThanOrEqual(10);
    } finally {
      client.close();
    }
  }, 30000);

  it("aborts a running trial back to a startable state", async () => {
    const client = await WireClient.connect(port);
    try {
      client.send({ kind: "start_trial" });
      const ack = await client.next(isAck("start_trial"));
      expect(ack.ok).toBe(true);
      await client.next(
        (m): m is StateMessage => isState(m) && m.trial_status === "running",
      );
      client.send({ kind: "abort" });
      const aborted = await client.next(isAck("abort"));
      expect(aborted.ok).toBe(true);
      await client.next(
        (m): m is StateMessage => isState(m) && m.trial_status !== "running",
        5000,
      );
    } finally {
      client.close();
    }
  }, 15000);
});
