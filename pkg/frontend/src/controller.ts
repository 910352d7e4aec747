// Session controller: polls the service, folds responses into the view,
// and re-renders. One submit in flight at a time; a refresh cancels and
// restarts the poll loop.

import * as api from "./api.js";
import { renderApp, renderComposition } from "./render.js";
import {
  canSubmit,
  chooseClass,
  finished,
  initialView,
  labelsFor,
  loadBatch,
  withCurve,
  type SessionView,
} from "./state.js";

export const POLL_MS = 1000;

export class SessionController {
  view: SessionView = initialView();
  private sessionId: string | null = null;
  private submitting = false;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private compositionHost: HTMLElement;

  constructor(private root: HTMLElement) {
    this.compositionHost = document.createElement("div");
  }

  async start(config: Record<string, unknown> = {}): Promise<void> {
    try {
      const { id } = await api.createSession(config);
      this.sessionId = id;
    } catch (err) {
      if (err instanceof api.ApiError && err.status === 409) {
        // a session already exists in this process; attach to it
        this.sessionId = null;
      } else {
        this.view = { ...this.view, message: String(err) };
        this.render();
        return;
      }
    }
    await this.refresh();
  }

  async attach(id: string): Promise<void> {
    this.sessionId = id;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
    if (this.sessionId === null) {
      return;
    }
    try {
      const status = await api.getStatus(this.sessionId);
      const metrics = await api.getMetrics(this.sessionId);
      this.view = withCurve(this.view, metrics.curve);
      this.compositionHost.textContent = "";
      if (metrics.batches.length > 0 && this.view.classNames.length > 0) {
        this.compositionHost.appendChild(
          renderComposition(metrics.batches, this.view.classNames),
        );
      }
      if (status.status === "finished") {
        this.view = finished(this.view, status.test_accuracy);
        this.render();
        return;
      }
      if (status.status === "awaiting_labels") {
        const keepChoices =
          this.view.status === "awaiting_labels" && this.view.pending.length > 0;
        if (!keepChoices) {
          const batch = await api.getBatch(this.sessionId);
          this.view = loadBatch(this.view, batch.items, batch.class_names);
        }
        this.render();
        return;
      }
      this.view = { ...this.view, status: "training" };
      this.render();
    } catch (err) {
      this.view = { ...this.view, message: String(err) };
      this.render();
    }
    this.pollTimer = setTimeout(() => void this.refresh(), POLL_MS);
  }

  choose(sampleId: string, classId: number): void {
    this.view = chooseClass(this.view, sampleId, classId);
    this.render();
  }

  async submit(): Promise<void> {
    if (!canSubmit(this.view) || this.submitting || this.sessionId === null) {
      return;
    }
    this.submitting = true;
    try {
      await api.submitLabels(this.sessionId, labelsFor(this.view));
      this.view = { ...this.view, status: "training", pending: [], message: null };
      this.render();
    } catch (err) {
      if (err instanceof api.ApiError) {
        // stale or invalid batch: show the reason, refetch, keep no bad state
        this.view = { ...this.view, message: err.message, pending: [] };
      } else {
        this.view = { ...this.view, message: String(err) };
      }
    } finally {
      this.submitting = false;
    }
    await this.refresh();
  }

  render(): void {
    renderApp(this.root, this.view, {
      onChoose: (sampleId, classId) => this.choose(sampleId, classId),
      onSubmit: () => void this.submit(),
    });
    this.root.appendChild(this.compositionHost);
  }
}
