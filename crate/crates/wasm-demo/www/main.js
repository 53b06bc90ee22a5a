import init, { waitCurves, stabilityMap, solveModel } from "./pkg/statepoll_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

const SERIES = [
  ["cyclic", "#1f77b4"],
  ["random", "#d62728"],
  ["bernoulli", "#2ca02c"],
  ["exhaustive", "#9467bd"],
];

function fmt(x) {
  return Number.isFinite(x) ? Number(x.toPrecision(6)).toString() : String(x);
}

function drawCurves() {
  $("c-pi-v").textContent = $("c-pi").value;
  $("c-err").textContent = "";
  const w = num("c-w");
  const s = num("c-s");
  let c;
  try {
    c = JSON.parse(waitCurves(JSON.stringify({
      n: parseInt($("c-n").value, 10), w, w2: w * w, sigma: s, sigma2: s * s,
      pi: num("c-pi"), points: 120,
    })));
  } catch (e) {
    $("c-err").textContent = String(e);
    return;
  }
  const cv = $("curves");
  const g = cv.getContext("2d");
  const pad = 48;
  g.clearRect(0, 0, cv.width, cv.height);

  // clip the y axis where the 1-limited curves blow up near saturation
  const finite = SERIES.flatMap(([k]) => c[k]).filter((v) => v !== null);
  const sorted = finite.slice().sort((a, b) => a - b);
  const ymax = sorted[Math.floor(0.9 * (sorted.length - 1))] * 1.1;
  const xmax = c.lambda[c.lambda.length - 1];
  const X = (x) => pad + (x / xmax) * (cv.width - 2 * pad);
  const Y = (y) => cv.height - pad - (y / ymax) * (cv.height - 2 * pad);

  g.strokeStyle = "#888";
  g.fillStyle = "#444";
  g.beginPath();
  g.moveTo(pad, pad / 2);
  g.lineTo(pad, cv.height - pad);
  g.lineTo(cv.width - pad / 2, cv.height - pad);
  g.stroke();
  for (let k = 0; k <= 4; k++) {
    g.fillText(fmt((ymax * k) / 4), 4, Y((ymax * k) / 4) + 4);
    g.fillText(fmt((xmax * k) / 4), X((xmax * k) / 4) - 10, cv.height - pad + 16);
  }
  g.fillText("arrival rate per station", cv.width / 2 - 50, cv.height - 10);
  g.fillText("E[W]", 8, 16);

  for (const [key, color] of SERIES) {
    g.strokeStyle = color;
    g.lineWidth = 2;
    g.beginPath();
    let on = false;
    c[key].forEach((v, i) => {
      if (v === null || v > ymax) {
        on = false;
        return;
      }
      if (on) g.lineTo(X(c.lambda[i]), Y(v));
      else g.moveTo(X(c.lambda[i]), Y(v));
      on = true;
    });
    g.stroke();
  }
  $("legend").innerHTML = SERIES.map(
    ([k, col]) => `<span style="color:${col}">&#9632; ${k}</span>`,
  ).join("");
}

const COLORS = ["#bbb", "#7fc97f", "#f0027f", "#333"];

function drawMap() {
  $("m-stay-v").textContent = $("m-stay").value;
  $("m-err").textContent = "";
  const res = 70;
  let cells;
  try {
    cells = stabilityMap(JSON.stringify({
      tau: [num("m-t1"), num("m-t2")],
      tau_tilde: [num("m-tt1"), num("m-tt2")],
      stay: num("m-stay"),
      lambda_max: num("m-max"),
      resolution: res,
    }));
  } catch (e) {
    $("m-err").textContent = String(e);
    return;
  }
  const cv = $("map");
  const g = cv.getContext("2d");
  const size = cv.width / res;
  for (let row = 0; row < res; row++) {
    for (let col = 0; col < res; col++) {
      g.fillStyle = COLORS[cells[row * res + col]];
      // lambda_2 grows upwards
      g.fillRect(col * size, cv.height - (row + 1) * size, size + 0.5, size + 0.5);
    }
  }
}

function hover(ev) {
  const cv = $("map");
  const r = cv.getBoundingClientRect();
  const max = num("m-max");
  const l1 = ((ev.clientX - r.left) / r.width) * max;
  const l2 = (1 - (ev.clientY - r.top) / r.height) * max;
  $("hover").textContent = `lambda_1 = ${fmt(l1)}, lambda_2 = ${fmt(l2)}`;
}

function solve() {
  $("s-err").textContent = "";
  $("solution").innerHTML = "";
  let s;
  try {
    s = JSON.parse(solveModel($("model").value));
  } catch (e) {
    $("s-err").textContent = String(e);
    return;
  }
  const rows = s.f.map((f, i) =>
    `<tr><td>${i + 1}</td><td>${fmt(f)}</td><td>${fmt(s.f_tilde[i])}</td>` +
    `<td>${fmt(s.cycle[i])}</td><td>${fmt(s.flux_margins[i])}</td></tr>`,
  );
  $("solution").innerHTML =
    `<table><tr><th>station</th><th>F</th><th>F&#771;</th><th>return time</th>` +
    `<th>F &minus; &lambda;&tau;&#772;</th></tr>${rows.join("")}</table>` +
    `<p>&tau;&#772; = ${fmt(s.tau_bar)}, &rho;&#770; = ${fmt(s.rho_hat)}; ` +
    `necessary conditions ${s.necessary_hold ? "hold" : "fail"}.</p>` +
    s.warnings.map((w) => `<p>${w}</p>`).join("");
}

await init();
for (const id of ["c-n", "c-w", "c-s", "c-pi"]) $(id).addEventListener("input", drawCurves);
for (const id of ["m-t1", "m-t2", "m-tt1", "m-tt2", "m-stay", "m-max"]) $(id).addEventListener("change", drawMap);
$("m-stay").addEventListener("input", drawMap);
$("map").addEventListener("mousemove", hover);
$("solve").addEventListener("click", solve);
drawCurves();
drawMap();
solve();
