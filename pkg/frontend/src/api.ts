import type { Outcome, ProtocolRequest, SessionView } from "./types";

/**
 * Non-2xx responses carry {"error": {"code", "message"}}.  The code is
 * what the UI branches on: "stage_conflict" means someone else recorded
 * this stage first and the view must be refreshed.
 */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function toApiError(res: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `HTTP ${res.status}`;
  try {
    const body = await res.json();
    if (body?.error?.code) {
      code = body.error.code;
      message = body.error.message ?? message;
    } else if (body?.detail) {
      // body-shape rejections come from the framework, not the service
      code = "invalid_input";
      message = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    }
  } catch {
    // non-JSON body, keep the generic message
  }
  return new ApiError(res.status, code, message);
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    if (!res.ok) throw await toApiError(res);
    if (res.status === 204) return undefined as T;
    return (await res.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createSession(protocol: ProtocolRequest): Promise<SessionView> {
    return this.post("/sessions", { protocol });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request(`/sessions/${id}`);
  }

  listSessions(status?: "awaiting_results" | "concluded"): Promise<{ sessions: SessionView[] }> {
    const query = status ? `?status=${status}` : "";
    return this.request(`/sessions${query}`);
  }

  submitResults(
    id: string,
    results: { test_id: number; outcome: Outcome }[],
  ): Promise<SessionView> {
    return this.post(`/sessions/${id}/results`, { results });
  }

  deleteSession(id: string): Promise<void> {
    return this.request(`/sessions/${id}`, { method: "DELETE" });
  }
}
