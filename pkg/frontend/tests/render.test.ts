import { beforeEach, describe, expect, it, vi } from "vitest";

import { renderApp, renderComposition } from "../src/render.js";
import { chooseClass, initialView, loadBatch } from "../src/state.js";

// Fixture payload in service order (descending score), not index order.
const ITEMS = [
  { id: "s7", score: 0.24, image_uri: "imgs/7.png" },
  { id: "s1", score: 0.2, image_uri: null },
  { id: "s4", score: 0.11, image_uri: null },
  { id: "s9", score: 0.11, image_uri: null },
  { id: "s0", score: 0.02, image_uri: null },
];
const CLASSES = ["normal", "abnormal", "unsure"];

function setup() {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  const callbacks = { onChoose: vi.fn(), onSubmit: vi.fn() };
  return { root, callbacks };
}

describe("batch grid", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders one tile per item in payload order with verbatim scores", () => {
    const { root, callbacks } = setup();
    renderApp(root, loadBatch(initialView(), ITEMS, CLASSES), callbacks);
    const tiles = [...root.querySelectorAll<HTMLElement>(".tile")];
    expect(tiles).toHaveLength(5);
    expect(tiles.map((t) => t.dataset.sampleId)).toEqual(["s7", "s1", "s4", "s9", "s0"]);
    const scores = tiles.map((t) => t.querySelector(".score")?.textContent);
    expect(scores).toEqual([
      "uncertainty 0.240",
      "uncertainty 0.200",
      "uncertainty 0.110",
      "uncertainty 0.110",
      "uncertainty 0.0200",
    ]);
  });

  it("number keys assign the matching class on the focused tile", () => {
    const { root, callbacks } = setup();
    renderApp(root, loadBatch(initialView(), ITEMS, CLASSES), callbacks);
    const tile = root.querySelector<HTMLElement>('[data-sample-id="s1"]')!;
    tile.dispatchEvent(new KeyboardEvent("keydown", { key: "2", bubbles: true }));
    expect(callbacks.onChoose).toHaveBeenCalledWith("s1", 1);
    tile.dispatchEvent(new KeyboardEvent("keydown", { key: "9", bubbles: true }));
    expect(callbacks.onChoose).toHaveBeenCalledTimes(1);
  });

  it("palette clicks choose classes", () => {
    const { root, callbacks } = setup();
    renderApp(root, loadBatch(initialView(), ITEMS, CLASSES), callbacks);
    const buttons = root.querySelectorAll<HTMLButtonElement>('[data-sample-id="s4"] .palette button');
    buttons[2].click();
    expect(callbacks.onChoose).toHaveBeenCalledWith("s4", 2);
  });

  it("submit stays disabled until every tile is labeled", () => {
    const { root, callbacks } = setup();
    let view = loadBatch(initialView(), ITEMS, CLASSES);
    for (const item of ITEMS.slice(0, -1)) {
      view = chooseClass(view, item.id, 0);
    }
    renderApp(root, view, callbacks);
    let submit = root.querySelector<HTMLButtonElement>("#submit")!;
    expect(submit.disabled).toBe(true);
    expect(submit.textContent).toContain("1 unlabeled");

    view = chooseClass(view, "s0", 2);
    renderApp(root, view, callbacks);
    submit = root.querySelector<HTMLButtonElement>("#submit")!;
    expect(submit.disabled).toBe(false);
    submit.click();
    expect(callbacks.onSubmit).toHaveBeenCalledOnce();
  });

  it("image failure swaps in a placeholder but labeling still works", () => {
    const { root, callbacks } = setup();
    renderApp(root, loadBatch(initialView(), ITEMS, CLASSES), callbacks);
    const tile = root.querySelector<HTMLElement>('[data-sample-id="s7"]')!;
    const img = tile.querySelector("img")!;
    img.dispatchEvent(new Event("error"));
    expect(tile.querySelector("img")).toBeNull();
    expect(tile.querySelector(".placeholder")?.textContent).toBe("no image");
    tile.querySelectorAll<HTMLButtonElement>(".palette button")[0].click();
    expect(callbacks.onChoose).toHaveBeenCalledWith("s7", 0);
  });

  it("finished view shows the stop banner with final accuracy", () => {
    const { root, callbacks } = setup();
    const view = { ...initialView(), status: "finished" as const, finalAccuracy: 0.912 };
    renderApp(root, view, callbacks);
    expect(root.querySelector(".banner-done")?.textContent).toContain("91.2%");
    expect(root.querySelector("#submit")).toBeNull();
  });
});

describe("curve and composition", () => {
  it("curve svg carries one dot per checkpoint", () => {
    const { root, callbacks } = setup();
    const curve = [
      { cycle: 0, labeled_count: 10, test_accuracy: 0.5, balanced_accuracy: 0.5 },
      { cycle: 1, labeled_count: 16, test_accuracy: 0.7, balanced_accuracy: 0.6 },
    ];
    renderApp(root, { ...initialView(), curve }, callbacks);
    const svg = root.querySelector("svg")!;
    expect(svg.getAttribute("data-points")).toBe("2");
    expect(svg.querySelectorAll("circle")).toHaveLength(2);
  });

  it("composition table shows one row per batch", () => {
    const rows = [
      { cycle: 0, counts: { a: 9, b: 1 }, fractions: { a: 0.9, b: 0.1 } },
      { cycle: 1, counts: { a: 5, b: 5 }, fractions: { a: 0.5, b: 0.5 } },
    ];
    const table = renderComposition(rows, ["a", "b"]);
    expect(table.querySelectorAll("tr")).toHaveLength(3);
    expect(table.textContent).toContain("90.0%");
  });
});
