import type {
  CandidatesPayload,
  ErrorPayload,
  Filter,
  GenerateOverrides,
  HealthPayload,
  SessionPayload,
  SteerPayload,
  VizPayload,
} from "./types.js";

// Minimal slice of fetch the client needs; tests inject a stub.
export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

/** A non-2xx response. Carries the server's structured error fields. */
export class ApiFailure extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function unwrap<T>(res: { status: number; json(): Promise<unknown> }): Promise<T> {
  const body = await res.json();
  if (res.status >= 200 && res.status < 300) {
    return body as T;
  }
  const err = (body as ErrorPayload).error;
  if (err && typeof err.code === "string") {
    throw new ApiFailure(res.status, err.code, err.message);
  }
  throw new ApiFailure(res.status, "unexpected", `http ${res.status}`);
}

export class ApiClient {
  private readonly doFetch: FetchLike;
  private readonly base: string;

  constructor(doFetch: FetchLike, base = "") {
    this.doFetch = doFetch;
    this.base = base.replace(/\/$/, "");
  }

  health(): Promise<HealthPayload> {
    return this.get("/api/health");
  }

  generate(prefix: string, phrases?: string[],
           config?: GenerateOverrides): Promise<SessionPayload> {
    const body: Record<string, unknown> = { prefix };
    if (phrases && phrases.length > 0) body.phrases = phrases;
    if (config) body.config = config;
    return this.post("/api/generate", body);
  }

  candidates(sessionId: string, position: number, filter: Filter,
             limit = 50): Promise<CandidatesPayload> {
    const query = new URLSearchParams({
      session_id: sessionId,
      position: String(position),
      filter,
      limit: String(limit),
    });
    return this.get(`/api/candidates?${query}`);
  }

  // the id goes through untouched: whatever the panel listed is submittable
  steer(sessionId: string, position: number,
        replacementId: number): Promise<SteerPayload> {
    return this.post("/api/steer", {
      session_id: sessionId,
      position,
      replacement_id: replacementId,
    });
  }

  viz(sessionId: string): Promise<VizPayload> {
    return this.get(`/api/viz?session_id=${encodeURIComponent(sessionId)}`);
  }

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await this.doFetch(this.base + path));
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    return unwrap<T>(await this.doFetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }));
  }
}
