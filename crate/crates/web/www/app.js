import init, { tight_trajectory, bound_curve, dynloc_run } from "./pkg/nsmpi_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function field(section, name) {
  const input = section.querySelector(`[name=${name}]`);
  return input.type === "number" ? Number(input.value) : input.value;
}

// series: [{ xs, ys, label, dashed }]
function plot(canvas, series, { xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = { l: 56, r: 12, t: 12, b: 32 };
  ctx.clearRect(0, 0, width, height);

  const xs = series.flatMap((s) => s.xs);
  const ys = series.flatMap((s) => s.ys).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  if (y1 === y0) y1 = y0 + 1;
  const px = (x) => pad.l + ((x - x0) / (x1 - x0 || 1)) * (width - pad.l - pad.r);
  const py = (y) => height - pad.b - ((y - y0) / (y1 - y0)) * (height - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, height - pad.b);
  ctx.lineTo(width - pad.r, height - pad.b);
  ctx.stroke();
  ctx.fillText(y1.toPrecision(3), 4, pad.t + 8);
  ctx.fillText(y0.toPrecision(3), 4, height - pad.b);
  ctx.fillText(String(x0), pad.l, height - 12);
  ctx.fillText(String(x1), width - pad.r - 20, height - 12);
  ctx.fillText(xLabel, width / 2, height - 4);
  ctx.fillText(yLabel, 4, height / 2);

  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.setLineDash(s.dashed ? [5, 4] : []);
    ctx.beginPath();
    s.xs.forEach((x, j) => (j ? ctx.lineTo(px(x), py(s.ys[j])) : ctx.moveTo(px(x), py(s.ys[j]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    if (s.label) ctx.fillText(s.label, width - pad.r - 110, pad.t + 12 + 13 * i);
  });
  ctx.setLineDash([]);
}

function guarded(section, run) {
  const note = section.querySelector(".note");
  section.querySelector("button").addEventListener("click", () => {
    note.classList.remove("err");
    try {
      run(note);
    } catch (e) {
      note.classList.add("err");
      note.textContent = String(e);
    }
  });
}

function setupTight() {
  const s = document.getElementById("tight");
  guarded(s, (note) => {
    const view = JSON.parse(
      tight_trajectory(field(s, "ell"), field(s, "m"), field(s, "epsilon"), field(s, "gamma"), field(s, "iterations")),
    );
    plot(s.querySelector("[data-plot=loss]"), [
      { xs: view.k, ys: view.loss, label: "loss" },
      { xs: view.k, ys: view.bound, label: "bound", dashed: true },
    ], { xLabel: "k" });
    const states = view.values[0].map((_, i) => i + 1);
    const picks = view.k.filter((k) => k === 1 || k === view.k.length || k % Math.ceil(view.k.length / 4) === 0);
    plot(
      s.querySelector("[data-plot=values]"),
      picks.map((k) => ({ xs: states, ys: view.values[k - 1], label: `v_${k}` })),
      { xLabel: "state" },
    );
    const gap = Math.max(...view.loss.map((l, i) => Math.abs(l - view.bound[i])));
    note.textContent = `${view.num_states} states; max |loss − bound| = ${gap.toExponential(2)}`;
  });
}

function setupBound() {
  const s = document.getElementById("bound");
  guarded(s, (note) => {
    const view = JSON.parse(bound_curve(field(s, "gamma"), field(s, "k"), field(s, "epsilon"), field(s, "max_ell")));
    plot(s.querySelector("canvas"), [
      { xs: view.ell, ys: view.bound, label: "bound" },
      { xs: view.ell, ys: view.ell.map(() => view.stationary), label: "ℓ = 1", dashed: true },
    ], { xLabel: "ℓ" });
    note.textContent =
      `ℓ* = ${view.horizon_ell} gives error constant ${view.horizon_constant.toFixed(4)}; ` +
      `bound ratio at max ℓ: ${(view.bound.at(-1) / view.stationary).toFixed(4)}`;
  });
}

function setupDynloc() {
  const s = document.getElementById("dynloc");
  guarded(s, (note) => {
    const started = performance.now();
    const view = JSON.parse(
      dynloc_run(
        field(s, "n"), field(s, "gamma"), field(s, "ell"), String(field(s, "m")),
        field(s, "epsilon"), field(s, "iterations"), field(s, "runs"), 0n,
      ),
    );
    plot(s.querySelector("canvas"), [
      { xs: view.k, ys: view.mean_loss, label: "mean loss" },
      { xs: view.k, ys: view.sup_loss, label: "sup loss", dashed: true },
    ], { xLabel: "k" });
    const tail = view.mean_loss.slice(-Math.max(1, Math.floor(view.k.length / 3)));
    const plateau = tail.reduce((a, b) => a + b, 0) / tail.length;
    note.textContent = `late mean loss ${plateau.toFixed(3)} (${Math.round(performance.now() - started)} ms)`;
  });
}

await init();
setupTight();
setupBound();
setupDynloc();
for (const b of document.querySelectorAll("button")) b.click();
