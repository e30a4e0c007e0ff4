// Browser entry point. Wires the WebSocket feed into the view model,
// the slider and arrow keys into the command gate, and the canvas into
// a requestAnimationFrame loop. All logic lives in the imported
// modules; this file is DOM glue only.
import { encodeCommand, isStateMessage, } from "./protocol.js";
import { ViewModel } from "./view.js";
import { apertureToSlider, arrowStep, CommandGate, sliderToAperture, } from "./input.js";
import { renderScene } from "./scene.js";
const vm = new ViewModel();
const gate = new CommandGate();
let ws = null;
let aperture = 0.015; // local setpoint the slider and arrows edit
function send(cmd) {
    if (ws && ws.readyState === WebSocket.OPEN) {
        ws.send(encodeCommand(cmd));
    }
}
gate.onSend = send;
function handleMessage(msg) {
    if (isStateMessage(msg)) {
        vm.pushSnapshot(msg, performance.now());
        gate.trialStatus = msg.trial_status;
        return;
    }
    if (msg.type === "ack") {
        const ack = msg;
        if (ack.kind === "start_trial" && ack.ok) {
            vm.noteTrialStart(ack["trial_index"], ack["mass_kg"]);
        }
        else if (!ack.ok) {
            setStatus(`rejected: ${ack["error"] ?? ack.kind}`);
        }
        return;
    }
    setStatus(`server error: ${msg.detail ?? msg.error}`);
}
function connect() {
    const sock = new WebSocket(`ws://${location.host}/ws`);
    ws = sock;
    sock.onmessage = (ev) => {
        for (const line of String(ev.data).split("\n")) {
            if (line.trim())
                handleMessage(JSON.parse(line));
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
const $ = (id) => document.getElementById(id);
function setStatus(text) {
    $("status").textContent = text;
}
function setAperture(valueM) {
    aperture = valueM;
    $("slider").value = String(1000 * apertureToSlider(valueM));
    $("readout").textContent = `${(1000 * valueM).toFixed(1)} mm`;
    gate.offer(valueM, performance.now());
}
function bindControls() {
    const slider = $("slider");
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
    const cond = $("condition");
    cond.addEventListener("change", () => {
        send({
            kind: "set_condition",
            condition: cond.value,
            client_time_s: performance.now() / 1000,
        });
    });
}
function loop() {
    const now = performance.now();
    gate.flush(now); // drains a value held back by the rate limit
    const canvas = $("scene");
    const ctx = canvas.getContext("2d");
    if (ctx)
        renderScene(ctx, vm, now);
    if (vm.hasState()) {
        const cond = $("condition");
        if (document.activeElement !== cond)
            cond.value = vm.state().condition;
    }
    requestAnimationFrame(loop);
}
bindControls();
setAperture(aperture);
connect();
requestAnimationFrame(loop);
