import init, { Demo, bottleneck } from "./pkg/gatebench_demo.js";

const $ = (id) => document.getElementById(id);
let demo = null;

function fail(el, err) {
  el.textContent = String(err);
  el.className = "error";
}

function drawSplit(cheap) {
  const c = $("split");
  const g = c.getContext("2d");
  const w = c.width * cheap;
  g.clearRect(0, 0, c.width, c.height);
  g.fillStyle = "#1f77b4";
  g.fillRect(0, 10, w, 30);
  g.fillStyle = "#d62728";
  g.fillRect(w, 10, c.width - w, 30);
  g.fillStyle = "#000";
  g.font = "12px sans-serif";
  g.fillText(`cheap ${(100 * cheap).toFixed(1)}%`, 4, 55);
  g.fillText(`escalated ${(100 * (1 - cheap)).toFixed(1)}%`, c.width - 110, 55);
}

function route() {
  if (!demo) return;
  const t = Number($("threshold").value);
  $("tval").textContent = t.toFixed(2);
  try {
    const r = JSON.parse(demo.route($("mode").value, t));
    drawSplit(r.cheap_path_rate);
    $("route").className = "";
    $("route").textContent =
      `it/s ${r.its.toFixed(2)}   mAP@[.5:.95] ${r.map_50_95.toFixed(3)}   mAP@.5 ${r.map_50.toFixed(3)}`;
  } catch (e) {
    fail($("route"), e);
  }
}

function sweep() {
  if (!demo) return;
  try {
    const s = JSON.parse(demo.sweep($("mode").value, Number($("loss").value)));
    $("plots").innerHTML = s.plot_map_vs_threshold + s.plot_map_vs_rate;
    const p = s.selected;
    $("choice").className = "";
    $("choice").textContent =
      `selected t = ${p.threshold}  rate ${p.cheap_path_rate.toFixed(3)}  mAP ${p.map_50_95.toFixed(3)}  ` +
      `${p.its.toFixed(2)} it/s  constraint ${s.constraint_satisfied ? "met" : "not met"}`;
    $("threshold").value = p.threshold;
    route();
  } catch (e) {
    fail($("choice"), e);
  }
}

function generate() {
  $("status").textContent = "generating...";
  try {
    demo = new Demo(Number($("images").value), Number($("seed").value));
    $("status").textContent = `${demo.numImages()} images`;
    route();
  } catch (e) {
    demo = null;
    fail($("status"), e);
  }
}

function check() {
  try {
    const r = JSON.parse(bottleneck(Number($("rh").value), Number($("rl").value), Number($("fh").value), Number($("fl").value)));
    $("bottleneck").className = "";
    $("bottleneck").textContent =
      `pixel ratio ${r.pixel_ratio.toFixed(2)}, fps ratio ${r.fps_ratio.toFixed(4)} -> ${r.verdict}`;
  } catch (e) {
    fail($("bottleneck"), e);
  }
}

await init();
$("generate").onclick = generate;
$("sweep").onclick = sweep;
$("mode").onchange = route;
$("threshold").oninput = route;
$("check").onclick = check;
generate();
