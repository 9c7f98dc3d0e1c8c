import init, { curvatureProfile, seekDistance, fuseAndRank } from "./pkg/earmark_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1b6ca8", "#d1495b", "#edae49", "#00798c"];

function fail(el, e) {
  el.innerHTML = "";
  const p = document.createElement("p");
  p.className = "err";
  p.textContent = String(e.message ?? e);
  el.appendChild(p);
}

function table(headers, rows) {
  const t = document.createElement("table");
  t.innerHTML = "<tr>" + headers.map((h) => `<th>${h}</th>`).join("") + "</tr>";
  for (const r of rows) {
    const tr = t.insertRow();
    for (const c of r) tr.insertCell().textContent = c;
  }
  return t;
}

function defaultCurve() {
  const pts = [];
  for (let i = 0; i < 120; i++) {
    const t = (i / 119) * Math.PI * 1.5;
    const r = 110 + 8 * Math.sin(5 * t);
    pts.push([150 + r * Math.cos(t), 150 + r * Math.sin(t)]);
  }
  return pts;
}

let traced = defaultCurve();

function drawTrace() {
  const ctx = $("trace").getContext("2d");
  ctx.clearRect(0, 0, 300, 300);
  ctx.beginPath();
  traced.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
  ctx.stroke();
  $("points").value = JSON.stringify(traced.map(([x, y]) => [Math.round(x * 10) / 10, Math.round(y * 10) / 10]));
}

function drawProfile(view) {
  const c = $("profile");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(0, c.height / 2);
  ctx.lineTo(c.width, c.height / 2);
  ctx.stroke();
  view.values.forEach((row, s) => {
    ctx.strokeStyle = COLORS[s % COLORS.length];
    ctx.beginPath();
    row.forEach((v, i) => {
      const x = (i / (row.length - 1)) * c.width;
      const y = (1 - v) * c.height;
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  });
}

async function main() {
  await init();
  drawTrace();

  $("trace").addEventListener("click", (ev) => {
    const b = ev.target.getBoundingClientRect();
    traced.push([ev.clientX - b.left, ev.clientY - b.top]);
    drawTrace();
  });
  $("clear").onclick = () => {
    traced = [];
    drawTrace();
  };
  $("run-profile").onclick = () => {
    const out = $("profile-out");
    try {
      const view = JSON.parse(curvatureProfile($("points").value, $("side").value));
      drawProfile(view);
      out.textContent = `scales ${view.scales.join(", ")}; interior side ${view.interior}`;
    } catch (e) {
      fail(out, e);
    }
  };
  $("run-distance").onclick = () => {
    const out = $("distance-out");
    try {
      const d = JSON.parse(seekDistance($("code-a").value, $("code-b").value));
      out.innerHTML = `<p>distance <b>${d.distance.toFixed(4)}</b></p>`;
      out.appendChild(table(["slot", "a", "b", "difference", "weight"],
        d.slots.map((s) => [s.slot, s.a, s.b, s.difference, s.weight])));
    } catch (e) {
      fail(out, e);
    }
  };
  $("run-rank").onclick = () => {
    const out = $("rank-out");
    try {
      const ranked = JSON.parse(fuseAndRank($("candidates").value, Number($("coef").value)));
      out.innerHTML = "";
      out.appendChild(table(["rank", "individual", "seek", "contour", "fused"],
        ranked.map((m) => [m.rank, m.individual, m.seek_distance.toFixed(4), m.contour_score.toFixed(4), m.fused_score.toFixed(4)])));
    } catch (e) {
      fail(out, e);
    }
  };
  $("run-profile").click();
  $("run-distance").click();
  $("run-rank").click();
}

main();
