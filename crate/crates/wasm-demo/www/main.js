import init, { spectrum_mask, measure_density, walk_profile } from "./pkg/cmv_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function model() {
  return [num("a-re"), num("a-im"), num("b-re"), num("b-im"), num("omega")];
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function plotLine(canvas, ys, { log = false } = {}) {
  const ctx = clear(canvas);
  const vals = log ? ys.map((y) => Math.log10(Math.max(y, 1e-300))) : Array.from(ys);
  let lo = Math.min(...vals);
  const hi = Math.max(...vals);
  if (log) lo = Math.max(lo, hi - 16);
  const span = hi - lo || 1;
  const pad = 20;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.strokeStyle = "#1f5fbf";
  ctx.lineWidth = 2;
  ctx.beginPath();
  vals.forEach((v, k) => {
    const x = pad + (w * k) / (vals.length - 1);
    const y = pad + h * (1 - (Math.max(v, lo) - lo) / span);
    k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  return { lo, hi };
}

function plotMask(canvas, mask) {
  const ctx = clear(canvas);
  const cx = canvas.width / 2;
  const cy = canvas.height / 2;
  const rad = canvas.height / 2 - 20;
  ctx.lineWidth = 1;
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.arc(cx, cy, rad, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.lineWidth = 14;
  ctx.strokeStyle = "#c0392b";
  const step = (2 * Math.PI) / mask.length;
  mask.forEach((m, k) => {
    if (!m) return;
    ctx.beginPath();
    // angle theta drawn counterclockwise from the positive real axis
    ctx.arc(cx, cy, rad, -(k + 0.5) * step, -(k - 0.5) * step);
    ctx.stroke();
  });
}

function guarded(statusId, fn) {
  const status = $(statusId);
  status.className = "status";
  try {
    const t0 = performance.now();
    const msg = fn();
    status.textContent = `${msg} (${(performance.now() - t0).toFixed(0)} ms)`;
  } catch (e) {
    status.className = "status error";
    status.textContent = String(e.message ?? e);
  }
}

function drawMask() {
  guarded("mask-status", () => {
    const level = parseInt($("level").value, 10);
    const mask = spectrum_mask(...model(), level, 2048);
    plotMask($("mask"), mask);
    const frac = mask.reduce((s, m) => s + m, 0) / mask.length;
    return `level ${level}: ${(100 * frac).toFixed(2)}% of 2048 angles pass`;
  });
}

function drawDensity() {
  guarded("density-status", () => {
    const r = num("r");
    const d = measure_density(...model(), r, 1024);
    const { lo, hi } = plotLine($("density"), d);
    return `theta in [0, 2 pi], density range [${lo.toExponential(2)}, ${hi.toExponential(2)}]`;
  });
}

function drawWalk() {
  guarded("walk-status", () => {
    const k = parseInt($("steps").value, 10);
    const p = walk_profile(...model(), k);
    plotLine($("walk"), p, { log: $("log").checked });
    const total = p.reduce((s, v) => s + v, 0);
    return `n in [-${2 * k}, ${2 * k}], total probability ${total.toFixed(12)}`;
  });
}

await init();
$("level").addEventListener("input", () => ($("level-out").textContent = $("level").value));
$("r").addEventListener("input", () => ($("r-out").textContent = $("r").value));
$("run-mask").addEventListener("click", drawMask);
$("run-density").addEventListener("click", drawDensity);
$("run-walk").addEventListener("click", drawWalk);
drawMask();
drawDensity();
drawWalk();
