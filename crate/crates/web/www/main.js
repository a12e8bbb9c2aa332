import init, { fixture, paretoGrid, checkPoint, zeroVarTable } from "./pkg/mdpstab_web.js";

const $ = (id) => document.getElementById(id);
const canvas = $("plot");
const ctx = canvas.getContext("2d");
const PAD = 40;

let grid = null;
let marks = [];

function rewardBound() {
  try {
    const m = JSON.parse($("mdp").value);
    let r = 0;
    for (const a of m.actions) {
      const [p, q] = String(a.reward).split("/").map(Number);
      r = Math.max(r, Math.abs(q ? p / q : p));
    }
    return r;
  } catch {
    return 1;
  }
}

function view() {
  const r = grid ? grid.bound : rewardBound();
  const span = Math.max(r, 0.5);
  return { u0: -span, u1: span, v0: 0, v1: Math.max(r * r, 0.5) };
}

function toPx(u, v, w) {
  const x = PAD + ((u - w.u0) / (w.u1 - w.u0)) * (canvas.width - 2 * PAD);
  const y = canvas.height - PAD - ((v - w.v0) / (w.v1 - w.v0)) * (canvas.height - 2 * PAD);
  return [x, y];
}

function fromPx(x, y, w) {
  const u = w.u0 + ((x - PAD) / (canvas.width - 2 * PAD)) * (w.u1 - w.u0);
  const v = w.v0 + ((canvas.height - PAD - y) / (canvas.height - 2 * PAD)) * (w.v1 - w.v0);
  return [u, v];
}

function draw() {
  const w = view();
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(PAD, PAD, canvas.width - 2 * PAD, canvas.height - 2 * PAD);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(`E[mp] from ${w.u0} to ${w.u1}`, PAD, canvas.height - 12);
  ctx.save();
  ctx.translate(12, canvas.height - PAD);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(`variance from 0 to ${w.v1}`, 0, 0);
  ctx.restore();

  if (grid) {
    const colors = { Yes: "#4caf50", No: "#ddd", Unknown: "#f0a030" };
    for (const c of grid.cells) {
      const [x, y] = toPx(c.uf, c.vf, w);
      ctx.fillStyle = colors[c.answer];
      ctx.fillRect(x - 2, y - 2, 4, 4);
    }
    ctx.strokeStyle = "#c62828";
    ctx.lineWidth = 2;
    ctx.beginPath();
    grid.staircase.forEach((p, i) => {
      const [x, y] = toPx(p.uf, p.vf, w);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        const [, yPrev] = toPx(grid.staircase[i - 1].uf, grid.staircase[i - 1].vf, w);
        ctx.lineTo(x, yPrev);
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
    ctx.lineWidth = 1;
  }

  for (const m of marks) {
    const [x, y] = toPx(m.u, m.v, w);
    ctx.strokeStyle = m.answer === "Yes" ? "#1b5e20" : "#b71c1c";
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

function status(text) {
  $("status").textContent = text;
}

// let the status line repaint before a long synchronous call
const later = (f) => setTimeout(f, 10);

function loadPreset() {
  $("mdp").value = fixture($("preset").value);
  $("from").value = $("preset").value === "m_uni" ? "s1" : "";
  $("kind").value = $("preset").value === "m_uni" ? "local" : "global";
  grid = null;
  marks = [];
  draw();
}

function runGrid() {
  status("computing grid...");
  later(() => {
    const t = performance.now();
    try {
      grid = JSON.parse(paretoGrid($("mdp").value, $("from").value, $("kind").value, $("eps").value));
      marks = [];
      const yes = grid.cells.filter((c) => c.answer === "Yes").length;
      status(`${grid.cells.length} cells, ${yes} yes, ${grid.witnesses.length} witnesses, ${(performance.now() - t).toFixed(0)} ms`);
      $("details").textContent = "staircase:\n" + grid.staircase.map((p) => `  (${p.u}, ${p.v})`).join("\n");
    } catch (e) {
      status(String(e));
    }
    draw();
  });
}

function runZero() {
  try {
    const rows = JSON.parse(zeroVarTable($("mdp").value));
    const cell = (x) => `<td>${x ?? "none"}</td>`;
    $("table").innerHTML =
      "<table><tr><th>state</th><th>global</th><th>local</th><th>hybrid</th></tr>" +
      rows.map((r) => `<tr><th>${r.state}</th>${cell(r.global)}${cell(r.local)}${cell(r.hybrid)}</tr>`).join("") +
      "</table>";
  } catch (e) {
    status(String(e));
  }
}

function clickCheck(ev) {
  const rect = canvas.getBoundingClientRect();
  const [u, v] = fromPx(ev.clientX - rect.left, ev.clientY - rect.top, view());
  const us = u.toFixed(2);
  const vs = Math.max(v, 0).toFixed(2);
  status(`checking (${us}, ${vs})...`);
  later(() => {
    try {
      const r = JSON.parse(checkPoint($("mdp").value, $("from").value, $("kind").value, us, vs, $("eps").value));
      marks.push({ u: Number(us), v: Number(vs), answer: r.answer });
      status(`(${us}, ${vs}): ${r.answer}`);
      $("details").textContent = JSON.stringify(r, null, 2);
    } catch (e) {
      status(String(e));
    }
    draw();
  });
}

await init();
$("preset").addEventListener("change", loadPreset);
$("grid").addEventListener("click", runGrid);
$("zero").addEventListener("click", runZero);
canvas.addEventListener("click", clickCheck);
loadPreset();
