import type { ApiErrorBody, CandidateRow, PlanJson, SessionState } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.detail);
  }
}

export interface CreateSessionRequest {
  program: string;
  query: string;
  budget: number;
  utility: "entropy" | "meu";
  actions?: unknown;
}

export interface ObserveRequest {
  observable: string;
  realization: string;
  idempotency_key?: string;
}

async function unwrap<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ApiErrorBody;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = { error: response.status, detail: response.statusText };
    }
    throw new ApiError(response.status, body);
  }
  return (await response.json()) as T;
}

export class SessionApi {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return unwrap<T>(response);
  }

  createSession(request: CreateSessionRequest): Promise<SessionState> {
    return this.post("/sessions", request);
  }

  async state(id: string): Promise<SessionState> {
    return unwrap(await fetch(this.url(`/sessions/${id}/state`)));
  }

  async whatif(id: string): Promise<CandidateRow[]> {
    const body = await unwrap<{ rows: CandidateRow[] }>(
      await fetch(this.url(`/sessions/${id}/whatif`)),
    );
    return body.rows;
  }

  observe(id: string, request: ObserveRequest): Promise<SessionState> {
    return this.post(`/sessions/${id}/observe`, request);
  }

  async plan(id: string): Promise<PlanJson> {
    return unwrap(await fetch(this.url(`/sessions/${id}/plan`)));
  }

  async remove(id: string): Promise<void> {
    await unwrap(await fetch(this.url(`/sessions/${id}`), { method: "DELETE" }));
  }
}
