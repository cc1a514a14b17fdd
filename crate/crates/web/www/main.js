import init, { deflection, farfield, scatterState } from "./pkg/gsmatrix_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function rows(data, width, skip = 0) {
  const out = [];
  for (let i = skip; i + width <= data.length; i += width) out.push(Array.from(data.slice(i, i + width)));
  return out;
}

// Draws columns 1.. of `table` against column 0.
function plot(canvas, table, colors, yRange) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: hgt } = canvas;
  ctx.clearRect(0, 0, w, hgt);
  if (!table.length) return;
  const xs = table.map((r) => r[0]);
  const ys = table.flatMap((r) => r.slice(1));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = yRange ?? [Math.min(0, ...ys), Math.max(...ys) || 1];
  const px = (x) => 30 + ((x - x0) / (x1 - x0 || 1)) * (w - 40);
  const py = (y) => hgt - 20 - ((y - y0) / (y1 - y0 || 1)) * (hgt - 30);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(px(x0), py(0));
  ctx.lineTo(px(x1), py(0));
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(y1.toFixed(2), 2, py(y1) + 8);
  ctx.fillText(y0.toFixed(2), 2, py(y0));
  colors.forEach((c, k) => {
    ctx.strokeStyle = c;
    ctx.beginPath();
    table.forEach((r, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, px(r[0]), py(r[k + 1])));
    ctx.stroke();
  });
}

function guarded(outId, f) {
  return () => {
    try {
      f();
      if (outId) $(outId).classList.remove("err");
    } catch (e) {
      if (outId) {
        $(outId).textContent = String(e.message ?? e);
        $(outId).classList.add("err");
      }
    }
  };
}

const updateDeflection = guarded("d-out", () => {
  const table = rows(deflection(num("d-amp"), 1.5, 301), 3);
  plot($("d-plot"), table.map((r) => [r[0], r[1]]), ["#1f77b4"], [-Math.PI, Math.PI]);
  const max = Math.max(...table.map((r) => Math.abs(r[1])));
  $("d-out").textContent = `impact parameter on x, outgoing angle on y; max |angle| = ${max.toFixed(4)}`;
});

const updateFarfield = guarded(null, () => {
  const table = rows(farfield(num("f-x"), num("f-y"), num("f-angle"), num("f-h"), 720), 3);
  plot($("f-plot"), table, ["#d62728", "#2ca02c"]);
});

const updateSmatrix = guarded("s-out", () => {
  const data = scatterState(num("s-amp"), 0, num("s-eta"), num("s-h"), 720);
  plot($("s-plot"), rows(data, 3, 4), ["#1f77b4", "#ff7f0e"]);
  const [delta, angle, eta, time] = data.slice(0, 4);
  $("s-out").textContent =
    `input (blue) and output (orange) moduli on the circle\n` +
    `phase δ = ${delta.toFixed(6)}   outgoing angle = ${angle.toFixed(6)}   ` +
    `outgoing impact = ${eta.toFixed(6)}   time = ${time.toFixed(3)}`;
});

function wire(ids, update) {
  for (const id of ids) {
    const input = $(id);
    const label = input.nextElementSibling;
    const show = () => (label.textContent = input.value);
    input.addEventListener("input", () => {
      show();
      update();
    });
    show();
  }
  update();
}

await init();
wire(["d-amp"], updateDeflection);
wire(["f-x", "f-y", "f-angle", "f-h"], updateFarfield);
wire(["s-amp", "s-eta", "s-h"], updateSmatrix);
