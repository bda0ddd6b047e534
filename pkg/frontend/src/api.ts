import type {
  AnnotationPayload,
  EventCollection,
  FieldError,
  HealthResponse,
  HistogramResponse,
  TimelineResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errors: FieldError[],
  ) {
    super(
      errors
        .map((e) => (e.field ? `${e.field}: ${e.message}` : e.message))
        .join("; ") || `HTTP ${status}`,
    );
    this.name = "ApiError";
  }
}

async function errorsFrom(res: Response): Promise<FieldError[]> {
  try {
    const body: unknown = await res.json();
    const detail = (body as { detail?: unknown })?.detail;
    if (Array.isArray(detail)) {
      return detail.map((d) => ({
        field: String((d as { field?: unknown })?.field ?? ""),
        message: String((d as { message?: unknown })?.message ?? "invalid value"),
      }));
    }
  } catch {
    // Non-JSON error body; fall through to a generic message.
  }
  return [{ field: "", message: `HTTP ${res.status}` }];
}

export class Client {
  constructor(readonly baseUrl: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    if (!res.ok) throw new ApiError(res.status, await errorsFrom(res));
    return (await res.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.getJson("/health");
  }

  events(minutes?: number): Promise<EventCollection> {
    const query = minutes === undefined ? "" : `?minutes=${minutes}`;
    return this.getJson(`/events${query}`);
  }

  histogram(date?: string): Promise<HistogramResponse> {
    const query = date === undefined ? "" : `?date=${encodeURIComponent(date)}`;
    return this.getJson(`/histogram${query}`);
  }

  timeline(limit?: number): Promise<TimelineResponse> {
    const query = limit === undefined ? "" : `?limit=${limit}`;
    return this.getJson(`/timeline${query}`);
  }

  async submitAnnotation(payload: AnnotationPayload): Promise<AnnotationPayload> {
    const res = await fetch(this.baseUrl + "/annotations", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (res.status !== 201) throw new ApiError(res.status, await errorsFrom(res));
    return (await res.json()) as AnnotationPayload;
  }
}
