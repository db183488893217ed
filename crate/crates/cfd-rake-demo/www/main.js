import init, { run_estimation_demo, comb_preview } from "./pkg/cfd_rake_demo.js";

const $ = (id) => document.getElementById(id);

const sliders = [
  ["cfd", (v) => `${v} Hz`],
  ["dur", (v) => `${v} s`],
  ["pitch", (v) => `${v} Hz`],
  ["depth", (v) => `${v} Hz`],
  ["comb-pitch", (v) => `${v} Hz`],
  ["comb-tau", (v) => v],
  ["comb-w", (v) => v],
];
for (const [id, fmt] of sliders) {
  const el = $(id);
  const out = $(`${id}-val`);
  const update = () => (out.textContent = fmt(el.value));
  el.addEventListener("input", update);
  update();
}

function clearCanvas(ctx) {
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

function drawSpectrogram(result) {
  const { width, height, values } = result.spectrogram;
  const img = new ImageData(width, height);
  for (let x = 0; x < width; x++) {
    for (let f = 0; f < height; f++) {
      const v = values[x * height + f];
      // y axis flipped: low frequencies at the bottom
      const i = 4 * ((height - 1 - f) * width + x);
      img.data[i] = v * 0.35;
      img.data[i + 1] = v * 0.8;
      img.data[i + 2] = v;
      img.data[i + 3] = 255;
    }
  }
  const ctx = $("spec").getContext("2d");
  clearCanvas(ctx);
  createImageBitmap(img).then((bmp) => {
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(bmp, 0, 0, ctx.canvas.width, ctx.canvas.height);
    ctx.fillStyle = "#ddd";
    ctx.font = "12px system-ui";
    ctx.fillText(`0–${(result.spectrogram.freq_span_hz / 1000).toFixed(1)} kHz, ${result.spectrogram.time_span_s.toFixed(1)} s`, 8, 16);
  });
}

function plotLine(ctx, xs, ys, color, { dashed = false } = {}) {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMin = Math.min(...ys), yMax = Math.max(...ys);
  const sx = (x) => ((x - xMin) / (xMax - xMin || 1)) * (w - 20) + 10;
  const sy = (y) => h - 12 - ((y - yMin) / (yMax - yMin || 1)) * (h - 24);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.setLineDash(dashed ? [5, 4] : []);
  ctx.beginPath();
  for (let i = 0; i < xs.length; i++) {
    const px = sx(xs[i]), py = sy(ys[i]);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  }
  ctx.stroke();
  ctx.setLineDash([]);
  return { sx, sy };
}

function drawGamma(result) {
  const ctx = $("gamma").getContext("2d");
  clearCanvas(ctx);
  const { sx } = plotLine(ctx, result.gamma_hz, result.gamma_energy, "#9ad");
  const mark = (hz, color, dashed) => {
    ctx.strokeStyle = color;
    ctx.setLineDash(dashed ? [5, 4] : []);
    ctx.beginPath();
    ctx.moveTo(sx(hz), 6);
    ctx.lineTo(sx(hz), ctx.canvas.height - 6);
    ctx.stroke();
    ctx.setLineDash([]);
  };
  for (const [hz] of result.secondary_peaks) mark(hz, "#e90");
  mark(result.true_cfd_hz, "#2c2");
  mark(result.estimated_cfd_hz, "#f44", true);
}

function drawTrace(result) {
  const ctx = $("trace").getContext("2d");
  clearCanvas(ctx);
  plotLine(ctx, result.pitch_time_s, result.pitch_raw_hz, "#999");
  plotLine(ctx, result.pitch_time_s, result.pitch_smoothed_hz, "#2cc");
}

function drawComb() {
  const params = {
    pitch_hz: Number($("comb-pitch").value),
    tau_max: Number($("comb-tau").value),
    halfwidth: Number($("comb-w").value),
  };
  const result = JSON.parse(comb_preview(JSON.stringify(params)));
  const ctx = $("comb").getContext("2d");
  clearCanvas(ctx);
  if (result.error) {
    ctx.fillStyle = "#f66";
    ctx.fillText(result.error, 10, 20);
    return;
  }
  const w = ctx.canvas.width, h = ctx.canvas.height;
  const maxHz = Math.max(...result.taps.map(([hz]) => hz)) + 50;
  const maxW = Math.max(...result.taps.map(([, wt]) => wt));
  ctx.strokeStyle = "#9ad";
  for (const [hz, wt] of result.taps) {
    const x = (hz / maxHz) * (w - 20) + 10;
    const y = (wt / maxW) * (h - 30);
    ctx.beginPath();
    ctx.moveTo(x, h - 12);
    ctx.lineTo(x, h - 12 - y);
    ctx.stroke();
  }
  ctx.fillStyle = "#ddd";
  ctx.font = "12px system-ui";
  ctx.fillText(`${result.taps.length} taps, bin ${result.bin_hz.toFixed(2)} Hz, pitch bin ${result.pitch_bin}`, 10, 16);
}

async function runEstimation() {
  const status = $("status");
  const button = $("run");
  button.disabled = true;
  status.textContent = "computing…";
  await new Promise((r) => setTimeout(r, 15)); // let the UI paint
  const params = {
    cfd_hz: Number($("cfd").value),
    snr_db: $("snr").value === "" ? null : Number($("snr").value),
    duration_s: Number($("dur").value),
    fft_size: Number($("fft").value),
    pitch_base_hz: Number($("pitch").value),
    vibrato_depth_hz: Number($("depth").value),
    vibrato_rate_hz: 0.25,
    seed: Number($("seed").value),
  };
  const t0 = performance.now();
  const result = JSON.parse(run_estimation_demo(JSON.stringify(params)));
  const elapsed = ((performance.now() - t0) / 1000).toFixed(2);
  button.disabled = false;
  if (result.error) {
    status.textContent = "";
    $("verdict").innerHTML = `<b style="color:#f66">error:</b> ${result.error}`;
    return;
  }
  status.textContent = `${elapsed} s in wasm`;
  const err = result.error_hz;
  const cls = Math.abs(err) < 5 ? "#2c2" : "#f80";
  $("verdict").innerHTML =
    `estimated <b>${result.estimated_cfd_hz.toFixed(2)} Hz</b> for a true shift of ` +
    `<b>${result.true_cfd_hz.toFixed(0)} Hz</b> — error <b style="color:${cls}">${err.toFixed(2)} Hz</b>, ` +
    `${result.is_speech ? "speech" : "not speech"} ` +
    `(pitch variance ${result.pitch_variance_hz2.toFixed(1)} Hz²)`;
  drawSpectrogram(result);
  drawGamma(result);
  drawTrace(result);
}

await init();
$("run").addEventListener("click", runEstimation);
for (const id of ["comb-pitch", "comb-tau", "comb-w"]) {
  $(id).addEventListener("input", drawComb);
}
drawComb();
