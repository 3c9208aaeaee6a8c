import init, { constants_table, c0_curve, Demo } from "./pkg/vpcharge_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function showError(el, e) {
  el.className = "fail";
  el.textContent = String(e.message ?? e);
}

function drawC0() {
  const cv = $("c0"), g = cv.getContext("2d");
  const lo = 16 / 3, hi = 6.99, n = 200;
  const ys = c0_curve(lo, hi, n);
  const logs = Array.from(ys, (y) => (Number.isFinite(y) ? Math.log10(y) : NaN));
  const top = Math.max(...logs.filter(Number.isFinite)), bot = Math.min(...logs.filter(Number.isFinite));
  g.clearRect(0, 0, cv.width, cv.height);
  g.beginPath();
  let pen = false;
  logs.forEach((y, i) => {
    if (!Number.isFinite(y)) { pen = false; return; }
    const px = (i / (n - 1)) * cv.width;
    const py = cv.height - 10 - ((y - bot) / (top - bot || 1)) * (cv.height - 20);
    pen ? g.lineTo(px, py) : g.moveTo(px, py);
    pen = true;
  });
  g.stroke();
  const m = num("m");
  const mx = ((m - lo) / (hi - lo)) * cv.width;
  g.strokeStyle = "#b00";
  g.beginPath(); g.moveTo(mx, 0); g.lineTo(mx, cv.height); g.stroke();
  g.strokeStyle = "#000";
  g.fillText(`log10 c0(m), m in [16/3, 6.99]`, 6, 12);
}

function showTable() {
  const out = $("table-out");
  try {
    out.className = "";
    out.textContent = JSON.stringify(JSON.parse(constants_table(num("m"), num("m0"), num("T"), num("k0"), num("f0"))), null, 2);
  } catch (e) { showError(out, e); }
  drawC0();
}

let demo = null, running = false;

function reset() {
  running = false;
  $("run-btn").textContent = "run";
  try {
    demo?.free();
    demo = new Demo(num("n") | 0, 1n, num("temp"), num("hole"), num("mass"));
    $("run-out").className = "";
    $("run-out").textContent = demo.status();
    draw();
  } catch (e) { demo = null; showError($("run-out"), e); }
}

function draw() {
  const cv = $("plasma"), g = cv.getContext("2d");
  const scale = cv.width / 8, cx = cv.width / 2, cy = cv.height / 2;
  g.clearRect(0, 0, cv.width, cv.height);
  g.fillStyle = "rgba(30,60,160,.5)";
  const p = demo.positions_xy();
  for (let i = 0; i < p.length; i += 2) g.fillRect(cx + p[i] * scale, cy - p[i + 1] * scale, 2, 2);
  const [qx, qy] = demo.charge_xy();
  g.fillStyle = "#b00";
  g.beginPath(); g.arc(cx + qx * scale, cy - qy * scale, 4, 0, 2 * Math.PI); g.fill();
}

function tick() {
  if (!running || !demo) return;
  try {
    const s = JSON.parse(demo.advance(5, num("dt")));
    delete s.record;
    $("run-out").textContent = JSON.stringify(s, null, 2);
    draw();
    requestAnimationFrame(tick);
  } catch (e) { running = false; showError($("run-out"), e); }
}

function probe() {
  const out = $("probe-out");
  if (!demo) return;
  try {
    const r = JSON.parse(demo.probe_bounds(num("probes") | 0, num("scale"), 7n));
    out.className = r.pass ? "" : "fail";
    out.textContent = JSON.stringify(r, null, 2);
  } catch (e) { showError(out, e); }
}

await init();
$("table-btn").onclick = showTable;
$("m").oninput = drawC0;
$("reset-btn").onclick = reset;
$("run-btn").onclick = () => {
  running = !running;
  $("run-btn").textContent = running ? "pause" : "run";
  tick();
};
$("probe-btn").onclick = probe;
showTable();
reset();
