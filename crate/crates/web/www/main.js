// Expects `wasm-pack build --target web` output in ./pkg.
import init, { profile_json, decay_json, omega_json } from "./pkg/dissipator_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

function plot(canvas, series, { logX = false, logY = false } = {}) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);
  const fx = logX ? Math.log10 : (v) => v;
  const fy = logY ? Math.log10 : (v) => v;
  const pts = series.map((s) =>
    s.x.map((x, i) => [fx(x), fy(s.y[i])]).filter(([a, b]) => Number.isFinite(a) && Number.isFinite(b)));
  const all = pts.flat();
  if (all.length === 0) return;
  let [x0, x1] = [Math.min(...all.map((p) => p[0])), Math.max(...all.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...all.map((p) => p[1])), Math.max(...all.map((p) => p[1]))];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const m = 44;
  const sx = (v) => m + ((v - x0) / (x1 - x0)) * (w - 2 * m);
  const sy = (v) => h - m + ((v - y0) / (y1 - y0)) * (2 * m - h);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(m, m / 2, w - 2 * m, h - 1.5 * m);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  const tick = (v, log) => (log ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(tick(x0, logX), m, h - m + 16);
  ctx.fillText(tick(x1, logX), w - m - 40, h - m + 16);
  ctx.fillText(tick(y1, logY), 2, m / 2 + 10);
  ctx.fillText(tick(y0, logY), 2, h - m);

  pts.forEach((p, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    p.forEach(([a, b], i) => (i ? ctx.lineTo(sx(a), sy(b)) : ctx.moveTo(sx(a), sy(b))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(series[k].label, w - m - 90, m / 2 + 16 + 14 * k);
  });
}

function call(json) {
  const v = JSON.parse(json);
  if (v.error) throw new Error(v.error);
  return v;
}

function update() {
  const mode = document.getElementById("mode").value;
  const alpha = Number(document.getElementById("alpha").value);
  const terms = Number(document.getElementById("terms").value);
  const nu = Number(document.getElementById("nu").value);
  const k = Number(document.getElementById("k").value);
  const err = document.getElementById("error");
  err.textContent = "";
  try {
    const p = call(profile_json(mode, alpha, terms, 1200));
    plot(document.getElementById("profile"), [
      { x: p.y, y: p.u, label: "u" },
      { x: p.y, y: p.psi, label: "ψ" },
    ]);

    const o = call(omega_json(mode, alpha, terms, 4 * (terms + 1) + 1));
    plot(document.getElementById("omega"), [
      { x: o.delta, y: o.omega0, label: "ω₀" },
      { x: o.delta, y: o.omega1, label: "ω₁" },
      { x: o.delta, y: o.bound, label: "Ψ₁ bound" },
    ], { logX: true, logY: true });
    document.getElementById("omega-note").textContent =
      `best δ = ${o.delta_star.toPrecision(4)}`;

    const d = call(decay_json(mode, alpha, Math.min(terms, 4), nu, k, 60));
    plot(document.getElementById("decay"), [
      { x: d.times.slice(1), y: d.norms.slice(1), label: "‖e^(-tR)‖" },
      { x: d.times.slice(1), y: d.gp_bound.slice(1).map((b) => Math.min(b, 1)), label: "bound" },
    ], { logX: true, logY: true });
    document.getElementById("decay-note").textContent =
      `M = ${d.modes}, rate = ${d.rate.toPrecision(4)}, dissipation time = ${d.tau.toPrecision(4)}` +
      (terms > 4 ? " (decay uses N = 4)" : "") + (d.pass ? "" : ", bound violated");
  } catch (e) {
    err.textContent = e.message;
  }
}

await init();
document.getElementById("run").addEventListener("click", update);
update();
