// Browser entry point. Wires the WebSocket feed into the view model,
// the slider and arrow keys into the command gate, and the canvas into
// a requestAnimationFrame loop. All logic lives in the imported
// modules; this file is DOM glue only.

import {
  AckMessage,
  CommandMessage,
  encodeCommand,
  isStateMessage,
  ServerMessage,
} from "./protocol.js";
import { ViewModel } from "./view.js";
import {
  apertureToSlider,
  arrowStep,
  CommandGate,
  sliderToAperture,
} from "./input.js";
import { renderScene } from "./scene.js";

const vm = new ViewModel();
const gate = new CommandGate();
let ws: WebSocket | null = null;
let aperture = 0.015; // local setpoint the slider and arrows edit

function send(cmd: CommandMessage): void {
  if (ws && ws.readyState === WebSocket.OPEN) {
    ws.send(encodeCommand(cmd));
  }
}

gate.onSend = send;

function handleMessage(msg: ServerMessage): void {
  if (isStateMessage(msg)) {
    vm.pushSnapshot(msg, performance.now());
    gate.trialStatus = msg.trial_status;
    return;
  }
  if (msg.type === "ack") {
    const ack = msg as AckMessage;
    if (ack.kind === "start_trial" && ack.ok) {
      vm.noteTrialStart(
        ack["trial_index"] as number,
        ack["mass_kg"] as number,
      );
    } else if (!ack.ok) {
      setStatus(`rejected: ${ack["error"] ?? ack.kind}`);
    }
    return;
  }
  setStatus(`server error: ${msg.detail ?? msg.error}`);
}

function connect(): void {
  const sock = new WebSocket(`ws://${location.host}/ws`);
  ws = sock;
  sock.onmessage = (ev) => {
    for (const line of String(ev.data).split("\n")) {
      if (line.trim()) handleMessage(JSON.parse(line) as ServerMessage);
    }
  };
  sock.onopen = () => setStatus("connected");
  sock.onclose = () => {
    setStatus("disconnected, retrying");
    setTimeout(connect, 1000); // the lost-feed banner covers the gap
  };
  sock.onerror = () => sock.close();
}

// -- controls ----------------------------------------------------------

const $ = (id: string) => document.getElementById(id)!;

function setStatus(text: string): void {
  $("status").textContent = text;
}

function setAperture(valueM: number): void {
  aperture = valueM;
  ($("slider") as HTMLInputElement).value = String(
    1000 * apertureToSlider(valueM),
  );
  $("readout").textContent = `${(1000 * valueM).toFixed(1)} mm`;
  gate.offer(valueM, performance.now());
}

function bindControls(): void {
  const slider = $("slider") as HTMLInputElement;
  slider.addEventListener("input", () => {
    setAperture(sliderToAperture(Number(slider.value) / 1000));
  });
  window.addEventListener("keydown", (ev) => {
    if (ev.key === "ArrowUp" || ev.key === "ArrowDown") {
      ev.preventDefault();
      setAperture(arrowStep(aperture, ev.key === "ArrowUp" ? 1 : -1));
    }
  });
  $("start").addEventListener("click", () => {
    send({ kind: "start_trial", client_time_s: performance.now() / 1000 });
  });
  $("abort").addEventListener("click", () => {
    send({ kind: "abort", client_time_s: performance.now() / 1000 });
  });
  const cond = $("condition") as HTMLSelectElement;
  cond.addEventListener("change", () => {
    send({
      kind: "set_condition",
      condition: cond.value,
      client_time_s: performance.now() / 1000,
    });
  });
}

function loop(): void {
  const now = performance.now();
  gate.flush(now); // drains a value held back by the rate limit
  const canvas = $("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (ctx) renderScene(ctx, vm, now);
  if (vm.hasState()) {
    const cond = $("condition") as HTMLSelectElement;
    if (document.activeElement !== cond) cond.value = vm.state().condition;
  }
  requestAnimationFrame(loop);
}

bindControls();
setAperture(aperture);
connect();
requestAnimationFrame(loop);
