import init, { demo_dataset, demo_cluster, demo_soinn_graph } from "./pkg/protoclust_wasm.js";

const canvas = document.getElementById("plot");
const ctx = canvas.getContext("2d");
const $ = (id) => document.getElementById(id);
const palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];
const paramNames = { lines: "Segments", banana: "Noise", highleyman: "(unused)", spherical: "Offset", simple: "Mean distance" };
const paramDefaults = { lines: 10, banana: 1, highleyman: 0, spherical: 0, simple: 6 };

let data = null;

const px = (v) => ((v + 1.1) / 2.2) * canvas.width;
const py = (v) => canvas.height - ((v + 1.1) / 2.2) * canvas.height;
const color = (i) => palette[i % palette.length];

function status(text, isError = false) {
  $("status").textContent = text;
  $("status").className = isError ? "err" : "";
}

function clear() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
}

function dots(points, colors, radius) {
  points.forEach(([x, y], i) => {
    ctx.fillStyle = colors[i];
    ctx.beginPath();
    ctx.arc(px(x), py(y), radius, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function marks(points, fill, size) {
  ctx.strokeStyle = "#000";
  for (const [x, y] of points) {
    ctx.fillStyle = fill;
    ctx.fillRect(px(x) - size / 2, py(y) - size / 2, size, size);
    ctx.strokeRect(px(x) - size / 2, py(y) - size / 2, size, size);
  }
}

function run(label, f) {
  try {
    const t0 = performance.now();
    const summary = f();
    status(`${summary}\n${label} took ${(performance.now() - t0).toFixed(0)} ms`);
  } catch (e) {
    status(String(e), true);
  }
}

function generate() {
  run("generation", () => {
    data = JSON.parse(demo_dataset($("kind").value, +$("size").value, +$("param").value, +$("seed").value));
    clear();
    dots(data.points, data.labels.map(color), 2.5);
    return `${data.points.length} points, ${data.n_classes} classes`;
  });
}

function cluster() {
  if (!data) return;
  run("clustering", () => {
    const view = JSON.parse(demo_cluster(JSON.stringify(data), $("method").value, +$("nc").value, +$("seed").value));
    clear();
    dots(data.points, view.assignment.map(color), 2.5);
    marks(view.prototypes, "rgba(255,255,255,0.6)", 4);
    marks(view.centroids, "#000", 8);
    return `${view.k} clusters, entropy ${view.entropy.toFixed(4)}, ${view.prototypes.length} prototypes`;
  });
}

function graph() {
  if (!data) return;
  $("lambda-v").textContent = $("lambda").value;
  $("age-v").textContent = $("age").value;
  run("SOINN", () => {
    const g = JSON.parse(demo_soinn_graph(JSON.stringify(data), +$("lambda").value, +$("age").value, +$("seed").value));
    clear();
    dots(data.points, data.points.map(() => "#ccc"), 2);
    ctx.lineWidth = 1.5;
    for (const [a, b] of g.edges) {
      ctx.strokeStyle = color(g.groups[a]);
      ctx.beginPath();
      ctx.moveTo(px(g.nodes[a][0]), py(g.nodes[a][1]));
      ctx.lineTo(px(g.nodes[b][0]), py(g.nodes[b][1]));
      ctx.stroke();
    }
    dots(g.nodes, g.groups.map(color), 4);
    return `${g.nodes.length} nodes, ${g.edges.length} edges, ${g.group_count} groups`;
  });
}

$("kind").addEventListener("change", () => {
  const kind = $("kind").value;
  $("param-name").textContent = paramNames[kind];
  $("param").value = paramDefaults[kind];
});
$("generate").addEventListener("click", generate);
$("cluster").addEventListener("click", cluster);
$("lambda").addEventListener("input", graph);
$("age").addEventListener("input", graph);

await init();
generate();
