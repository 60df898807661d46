// Typed client for the session service. The JSON shapes here mirror the
// server's session view and trace_v1 documents exactly; nothing is cached
// beyond what a GET can rebuild.

export interface UpdateSignal {
  kind: string;
  origin: string;
  payload: Record<string, unknown>;
}

export interface FeedbackItem {
  item_id: string;
  kind: "numeracy" | "attribute" | "spatial" | "fidelity";
  target: Record<string, unknown>;
  expected: unknown;
  observed: unknown;
  severity: "error" | "warning";
  suggested_update: UpdateSignal | null;
}

export interface FeedbackReport {
  items: FeedbackItem[];
  satisfied: boolean;
}

export interface SessionView {
  session_id: string;
  created_at: number;
  prompt: string;
  preset: string;
  seed: number;
  status: "active" | "satisfied" | "budget_exhausted";
  k: number;
  iterations: number;
  canonical_prompt: string;
  report: FeedbackReport;
  render_url: string;
  max_iterations: number;
}

export interface IterateBody {
  accepted_item_ids?: string[];
  manual_updates?: UpdateSignal[];
  prompt_edit?: {
    add_relations?: [string, string, string][];
    add_attributes?: [string, string][];
  };
}

export interface TraceDocument {
  schema: string;
  prompt: string;
  canonical_prompt: string;
  config_digest: string;
  iterations: unknown[];
  status: string;
  final_eval: { numeracy: boolean; attribute: boolean; spatial: boolean };
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let code = "http_error";
      let message = `${response.status}`;
      let detail: unknown;
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
        detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, message, detail);
    }
    return (await response.json()) as T;
  }

  async listPresets(): Promise<string[]> {
    const body = await this.request<{ presets: string[] }>("/api/presets");
    return body.presets;
  }

  createSession(prompt: string, preset: string, seed?: number): Promise<SessionView> {
    const payload: Record<string, unknown> = { prompt, preset };
    if (seed !== undefined) payload.seed = seed;
    return this.request<SessionView>("/api/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request<SessionView>(`/api/sessions/${sessionId}`);
  }

  iterate(sessionId: string, body: IterateBody): Promise<SessionView> {
    return this.request<SessionView>(`/api/sessions/${sessionId}/iterate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getTrace(sessionId: string): Promise<TraceDocument> {
    return this.request<TraceDocument>(`/api/sessions/${sessionId}/trace`);
  }

  deleteSession(sessionId: string): Promise<unknown> {
    return this.fetchFn(`${this.baseUrl}/api/sessions/${sessionId}`, {
      method: "DELETE",
    });
  }

  renderUrl(sessionId: string, k: number): string {
    return `${this.baseUrl}/api/sessions/${sessionId}/iterations/${k}/render.svg`;
  }
}
