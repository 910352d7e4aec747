// Typed client for the labeling service. Paths are relative so the bundle
// works from whatever origin serves it.

export interface SessionStatus {
  id: string;
  status: "training" | "awaiting_labels" | "finished";
  cycle: number | null;
  labeled_count: number | null;
  test_accuracy: number | null;
  error: string | null;
}

export interface BatchItem {
  id: string;
  score: number;
  image_uri: string | null;
}

export interface BatchPayload {
  items: BatchItem[];
  class_names: string[];
}

export interface CurvePoint {
  cycle: number;
  labeled_count: number;
  test_accuracy: number;
  balanced_accuracy: number;
}

export interface CompositionRow {
  cycle: number;
  counts: Record<string, number>;
  fractions: Record<string, number>;
}

export interface MetricsPayload {
  curve: CurvePoint[];
  batches: CompositionRow[];
  status: string;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  if (!resp.ok) {
    let code = "http_error";
    let message = `${resp.status}`;
    try {
      const body = (await resp.json()) as ApiErrorBody;
      code = body.error.code;
      message = body.error.message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

export function createSession(config: Record<string, unknown>): Promise<{ id: string }> {
  return request("/api/session", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(config),
  });
}

export function getStatus(id: string): Promise<SessionStatus> {
  return request(`/api/session/${id}`);
}

export function getBatch(id: string): Promise<BatchPayload> {
  return request(`/api/session/${id}/batch`);
}

export function submitLabels(
  id: string,
  labels: Record<string, number>,
): Promise<{ status: string; labeled_count: number | null; test_accuracy: number | null }> {
  return request(`/api/session/${id}/labels`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ labels }),
  });
}

export function getMetrics(id: string): Promise<MetricsPayload> {
  return request(`/api/session/${id}/metrics`);
}

export function imageUrl(sampleId: string): string {
  return `/api/image/${encodeURIComponent(sampleId)}`;
}
