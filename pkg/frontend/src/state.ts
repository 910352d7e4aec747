// Pure view state for one labeling session. The pending list keeps the
// service payload order verbatim; the UI never reorders or recomputes scores.

import type { BatchItem, CurvePoint } from "./api.js";

export interface PendingItem extends BatchItem {
  chosen: number | null;
}

export interface SessionView {
  status: "training" | "awaiting_labels" | "finished" | "connecting";
  classNames: string[];
  pending: PendingItem[];
  curve: CurvePoint[];
  message: string | null;
  finalAccuracy: number | null;
}

export function initialView(): SessionView {
  return {
    status: "connecting",
    classNames: [],
    pending: [],
    curve: [],
    message: null,
    finalAccuracy: null,
  };
}

export function loadBatch(view: SessionView, items: BatchItem[], classNames: string[]): SessionView {
  return {
    ...view,
    status: "awaiting_labels",
    classNames,
    pending: items.map((item) => ({ ...item, chosen: null })),
    message: null,
  };
}

export function chooseClass(view: SessionView, sampleId: string, classId: number): SessionView {
  if (classId < 0 || classId >= view.classNames.length) {
    return view;
  }
  return {
    ...view,
    pending: view.pending.map((item) =>
      item.id === sampleId ? { ...item, chosen: classId } : item,
    ),
  };
}

export function canSubmit(view: SessionView): boolean {
  return (
    view.status === "awaiting_labels" &&
    view.pending.length > 0 &&
    view.pending.every((item) => item.chosen !== null)
  );
}

export function labelsFor(view: SessionView): Record<string, number> {
  const labels: Record<string, number> = {};
  for (const item of view.pending) {
    if (item.chosen === null) {
      throw new Error(`item ${item.id} has no chosen class`);
    }
    labels[item.id] = item.chosen;
  }
  return labels;
}

export function withCurve(view: SessionView, curve: CurvePoint[]): SessionView {
  return { ...view, curve };
}

export function finished(view: SessionView, finalAccuracy: number | null): SessionView {
  return { ...view, status: "finished", pending: [], finalAccuracy };
}
