import init, { exploreTransfer, fringeSweep, coincidenceHistogram } from "./pkg/photonlink_web.js";

const $ = (id) => document.getElementById(id);

function unwrap(json, out) {
  const r = JSON.parse(json);
  if (r.error !== undefined) {
    out.className = "out err";
    out.textContent = r.error;
    return null;
  }
  out.className = "out";
  return r.ok;
}

// Minimal plot: data-space to canvas mapping plus axes with a few ticks.
function frame(canvas, xr, yr) {
  const ctx = canvas.getContext("2d");
  const m = { l: 50, r: 12, t: 10, b: 28 };
  const w = canvas.width - m.l - m.r;
  const h = canvas.height - m.t - m.b;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const X = (x) => m.l + ((x - xr[0]) / (xr[1] - xr[0])) * w;
  const Y = (y) => m.t + h - ((y - yr[0]) / (yr[1] - yr[0])) * h;
  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.strokeRect(m.l, m.t, w, h);
  for (let i = 0; i <= 4; i++) {
    const xv = xr[0] + ((xr[1] - xr[0]) * i) / 4;
    const yv = yr[0] + ((yr[1] - yr[0]) * i) / 4;
    ctx.fillText(+xv.toPrecision(3), X(xv) - 10, m.t + h + 16);
    ctx.fillText(+yv.toPrecision(3), 4, Y(yv) + 4);
  }
  return { ctx, X, Y };
}

function line(p, xs, ys, color) {
  p.ctx.strokeStyle = color;
  p.ctx.beginPath();
  xs.forEach((x, i) => (i ? p.ctx.lineTo(p.X(x), p.Y(ys[i])) : p.ctx.moveTo(p.X(x), p.Y(ys[i]))));
  p.ctx.stroke();
}

function showValues() {
  document.querySelectorAll("span[data-for]").forEach((s) => (s.textContent = $(s.dataset.for).value));
}

function updateTransfer() {
  showValues();
  const out = $("t-out");
  const v = unwrap(exploreTransfer(+$("t-w1").value, +$("t-g1").value, +$("t-g2").value, +$("t-d").value), out);
  if (!v) return;
  const p = frame($("t-plot"), [0, 2 * Math.PI], [0, 1]);
  line(p, v.mismatch_rad, v.fidelity_curve, "#1f5fbf");
  const d = +$("t-d").value;
  p.ctx.fillStyle = "#c0392b";
  p.ctx.beginPath();
  p.ctx.arc(p.X(d), p.Y(v.fidelity), 4, 0, 2 * Math.PI);
  p.ctx.fill();
  out.textContent =
    `transfer probability ${v.probability.toFixed(4)}   fidelity ${v.fidelity.toFixed(4)}\n` +
    `transferred bin weights ${v.bin_weights.map((w) => w.toFixed(3)).join(" / ")}`;
}

function later(button, fn) {
  button.disabled = true;
  setTimeout(() => {
    try {
      fn();
    } finally {
      button.disabled = false;
    }
  }, 20);
}

function runSweep() {
  const out = $("s-out");
  out.textContent = "simulating...";
  later($("s-run"), () => {
    const v = unwrap(
      fringeSweep($("s-preset").value, +$("s-v").value, +$("s-dark").value, +$("s-n").value, +$("s-t").value, +$("s-seed").value),
      out,
    );
    if (!v) return;
    const ymax = Math.max(...v.rate_per_s.map((r, i) => r + v.rate_err_per_s[i]), ...v.model_rate_per_s) * 1.1;
    const p = frame($("s-plot"), [0, 2 * Math.PI], [0, ymax]);
    line(p, v.model_phase_rad, v.model_rate_per_s, "#1f5fbf");
    p.ctx.strokeStyle = p.ctx.fillStyle = "#c0392b";
    v.phase_rad.forEach((x, i) => {
      const y = v.rate_per_s[i];
      const e = v.rate_err_per_s[i];
      p.ctx.beginPath();
      p.ctx.moveTo(p.X(x), p.Y(y - e));
      p.ctx.lineTo(p.X(x), p.Y(y + e));
      p.ctx.stroke();
      p.ctx.fillRect(p.X(x) - 2, p.Y(y) - 2, 4, 4);
    });
    const f = v.fit;
    out.textContent =
      `V_raw ${f.v_raw.toFixed(4)} ± ${f.v_raw_err.toFixed(4)}   V_net ${f.v_net.toFixed(4)} ± ${f.v_net_err.toFixed(4)}\n` +
      `fidelity (1+V_net)/2 = ${v.fidelity.toFixed(4)}   Bell S = ${(2 * Math.SQRT2 * f.v_net).toFixed(3)}   ` +
      `accidentals ${f.accidental_level.toExponential(3)} /s`;
  });
}

function runHistogram() {
  const out = $("h-out");
  out.textContent = "simulating...";
  later($("h-run"), () => {
    const v = unwrap(
      coincidenceHistogram($("h-preset").value, $("h-avg").checked, +$("h-phi").value, +$("h-t").value, +$("h-seed").value),
      out,
    );
    if (!v) return;
    const x = v.bin_center_ns;
    const width = x.length > 1 ? x[1] - x[0] : 1;
    const p = frame($("h-plot"), [x[0] - width / 2, x[x.length - 1] + width / 2], [0, Math.max(1, ...v.counts) * 1.1]);
    if (v.peaks) {
      const w = v.peaks.windows;
      p.ctx.fillStyle = "rgba(31, 95, 191, 0.12)";
      for (const win of [w.side_early, w.central, w.side_late]) {
        p.ctx.fillRect(p.X(win.lo_ns), 10, p.X(win.hi_ns) - p.X(win.lo_ns), p.Y(0) - 10);
      }
    }
    p.ctx.fillStyle = "#333";
    x.forEach((c, i) => {
      const x0 = p.X(c - width / 2);
      p.ctx.fillRect(x0, p.Y(v.counts[i]), Math.max(1, p.X(c + width / 2) - x0 - 1), p.Y(0) - p.Y(v.counts[i]));
    });
    if (v.peaks) {
      const r = v.peaks;
      out.textContent =
        `window counts ${r.side_early_counts} / ${r.central_counts} / ${r.side_late_counts}   ` +
        `accidentals per window ${r.accidentals.toFixed(1)}   central:side ${r.central_to_side_ratio.toFixed(3)}`;
    } else {
      out.textContent = `peaks not found: ${v.peak_error}`;
    }
  });
}

await init();
for (const id of ["t-w1", "t-g1", "t-g2", "t-d"]) $(id).addEventListener("input", updateTransfer);
$("s-run").addEventListener("click", runSweep);
$("h-run").addEventListener("click", runHistogram);
updateTransfer();
