// DOM rendering: tile grid in payload order, accuracy curve as inline SVG,
// batch-composition table, status banners.

import { imageUrl } from "./api.js";
import type { CompositionRow, CurvePoint } from "./api.js";
import { canSubmit, type SessionView } from "./state.js";

export interface RenderCallbacks {
  onChoose: (sampleId: string, classId: number) => void;
  onSubmit: () => void;
}

export function renderApp(root: HTMLElement, view: SessionView, cb: RenderCallbacks): void {
  root.textContent = "";
  root.appendChild(renderBanner(view));
  if (view.status === "awaiting_labels") {
    root.appendChild(renderGrid(view, cb));
    root.appendChild(renderSubmit(view, cb));
  }
  root.appendChild(renderCurve(view.curve));
}

function renderBanner(view: SessionView): HTMLElement {
  const banner = el("div", "banner");
  banner.dataset.status = view.status;
  if (view.status === "finished") {
    const acc = view.finalAccuracy === null ? "?" : (100 * view.finalAccuracy).toFixed(1);
    banner.textContent = `Session finished - final test accuracy ${acc}%`;
    banner.classList.add("banner-done");
  } else if (view.status === "training") {
    banner.textContent = "Model is retraining...";
  } else if (view.status === "connecting") {
    banner.textContent = "Connecting to the labeling service...";
  } else {
    banner.textContent = `Label the ${view.pending.length} most uncertain samples (keys 1-${view.classNames.length})`;
  }
  if (view.message) {
    const msg = el("div", "error-message");
    msg.textContent = view.message;
    banner.appendChild(msg);
  }
  return banner;
}

function renderGrid(view: SessionView, cb: RenderCallbacks): HTMLElement {
  const grid = el("div", "grid");
  view.pending.forEach((item, position) => {
    const tile = el("div", "tile");
    tile.tabIndex = 0;
    tile.dataset.sampleId = item.id;
    tile.dataset.position = String(position);

    if (item.image_uri) {
      const img = document.createElement("img");
      img.src = imageUrl(item.id);
      img.alt = item.id;
      img.addEventListener("error", () => {
        img.replaceWith(placeholder());
      });
      tile.appendChild(img);
    } else {
      tile.appendChild(placeholder());
    }

    const score = el("div", "score");
    score.textContent = `uncertainty ${item.score.toPrecision(3)}`;
    tile.appendChild(score);

    const palette = el("div", "palette");
    view.classNames.forEach((name, classId) => {
      const button = document.createElement("button");
      button.type = "button";
      button.textContent = `${classId + 1} ${name}`;
      button.className = item.chosen === classId ? "chosen" : "";
      button.addEventListener("click", () => cb.onChoose(item.id, classId));
      palette.appendChild(button);
    });
    tile.appendChild(palette);

    tile.addEventListener("keydown", (event) => {
      const key = Number.parseInt(event.key, 10);
      if (Number.isInteger(key) && key >= 1 && key <= view.classNames.length) {
        cb.onChoose(item.id, key - 1);
      }
    });
    grid.appendChild(tile);
  });
  return grid;
}

function renderSubmit(view: SessionView, cb: RenderCallbacks): HTMLElement {
  const bar = el("div", "submit-bar");
  const remaining = view.pending.filter((item) => item.chosen === null).length;
  const button = document.createElement("button");
  button.id = "submit";
  button.type = "button";
  button.disabled = !canSubmit(view);
  button.textContent = remaining === 0 ? "Submit labels" : `Submit (${remaining} unlabeled)`;
  button.addEventListener("click", () => cb.onSubmit());
  bar.appendChild(button);
  return bar;
}

export function renderCurve(curve: CurvePoint[]): HTMLElement {
  const wrap = el("div", "curve");
  const title = el("h2");
  title.textContent = "Test accuracy vs labels";
  wrap.appendChild(title);

  const width = 420;
  const height = 160;
  const pad = 30;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("data-points", String(curve.length));

  if (curve.length > 0) {
    const xs = curve.map((p) => p.labeled_count);
    const xMin = Math.min(...xs);
    const xMax = Math.max(...xs, xMin + 1);
    const coords = curve.map((p) => {
      const x = pad + ((p.labeled_count - xMin) / (xMax - xMin)) * (width - 2 * pad);
      const y = height - pad - p.test_accuracy * (height - 2 * pad);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    });
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", coords.join(" "));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "#2a7d2a");
    line.setAttribute("stroke-width", "2");
    svg.appendChild(line);
    for (const pair of coords) {
      const [x, y] = pair.split(",");
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", x);
      dot.setAttribute("cy", y);
      dot.setAttribute("r", "3");
      dot.setAttribute("fill", "#2a7d2a");
      svg.appendChild(dot);
    }
  }
  wrap.appendChild(svg);

  const latest = curve[curve.length - 1];
  const caption = el("div", "curve-caption");
  caption.textContent = latest
    ? `${curve.length} checkpoints - latest ${(100 * latest.test_accuracy).toFixed(1)}% at ${latest.labeled_count} labels`
    : "no checkpoints yet";
  wrap.appendChild(caption);
  return wrap;
}

export function renderComposition(rows: CompositionRow[], classNames: string[]): HTMLElement {
  const wrap = el("div", "composition");
  const title = el("h2");
  title.textContent = "Batch composition";
  wrap.appendChild(title);
  const table = document.createElement("table");
  const head = document.createElement("tr");
  for (const text of ["batch", ...classNames]) {
    const th = document.createElement("th");
    th.textContent = text;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const row of rows) {
    const tr = document.createElement("tr");
    const td = document.createElement("td");
    td.textContent = String(row.cycle);
    tr.appendChild(td);
    for (const name of classNames) {
      const cell = document.createElement("td");
      const frac = row.fractions[name] ?? 0;
      cell.textContent = `${(100 * frac).toFixed(1)}%`;
      tr.appendChild(cell);
    }
    table.appendChild(tr);
  }
  wrap.appendChild(table);
  return wrap;
}

function placeholder(): HTMLElement {
  const box = el("div", "placeholder");
  box.textContent = "no image";
  return box;
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  return node;
}
