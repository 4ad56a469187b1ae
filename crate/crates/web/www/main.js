import init, { errorVsSensors, chernoffVsThreshold, simulate } from "./pkg/bqdetect_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Draws interleaved [x, y, x, y, ...] series; logY plots log10(y).
function plot(canvas, series, { logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const pts = series.map((s) => s.points.map(([x, y]) => [x, logY ? Math.log10(y) : y]).filter(([, y]) => Number.isFinite(y)));
  const all = pts.flat();
  if (all.length === 0) return;
  const xs = all.map((p) => p[0]);
  const ys = all.map((p) => p[1]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  const fmt = (v) => (logY ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(fmt(y1), 2, pad + 4);
  ctx.fillText(fmt(y0), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 20, h - pad + 14);

  pts.forEach((p, i) => {
    ctx.strokeStyle = series[i].color;
    ctx.beginPath();
    p.forEach(([x, y], j) => (j ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
    ctx.fillStyle = series[i].color;
    ctx.fillText(series[i].label, w - pad - 160, pad + 14 + 14 * i);
  });
}

function guarded(out, f) {
  try {
    f();
  } catch (e) {
    $(out).textContent = `error: ${e.message ?? e}`;
  }
}

function runK() {
  guarded("k-out", () => {
    const v = errorVsSensors(num("k-snr"), num("k-max"), num("k-pi0"));
    const err = [], est = [];
    for (let i = 0; i < v.length; i += 2) {
      err.push([i / 2 + 1, v[i]]);
      est.push([i / 2 + 1, v[i + 1]]);
    }
    plot($("k-plot"), [
      { points: err, color: "#c33", label: "exact MAP error" },
      { points: est, color: "#36c", label: "exp(-K C)" },
    ], { logY: true });
    const last = err[err.length - 1];
    $("k-out").textContent = `K=${last[0]}: error ${last[1].toExponential(4)}`;
  });
}

function runT() {
  guarded("t-out", () => {
    const v = chernoffVsThreshold(num("t-snr"), num("t-lo"), num("t-hi"), 401);
    const pts = [];
    for (let i = 0; i < v.length; i += 2) pts.push([v[i], v[i + 1]]);
    plot($("t-plot"), [{ points: pts, color: "#393", label: "Chernoff information" }]);
    const best = pts.reduce((a, b) => (b[1] > a[1] ? b : a));
    $("t-out").textContent = `max ${best[1].toFixed(6)} at threshold ${best[0].toFixed(3)}`;
  });
}

function runS() {
  guarded("s-out", () => {
    const t0 = performance.now();
    const [rate, ci, exact] = simulate(num("s-snr"), num("s-k"), num("s-tau"), num("s-trials"), num("s-seed"));
    const ms = performance.now() - t0;
    $("s-out").textContent =
      `simulated ${rate.toExponential(4)} +- ${ci.toExponential(2)}\n` +
      `closed form ${exact.toExponential(4)}\n` +
      `${ms.toFixed(0)} ms`;
  });
}

await init();
$("k-run").onclick = runK;
$("t-run").onclick = runT;
$("s-run").onclick = runS;
runK();
runT();
