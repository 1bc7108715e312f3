/**
 * Typed client for the annotation session service.
 *
 * The UI never computes posteriors or win rates itself; every number it
 * shows comes out of these responses.  Mutations carry an expected
 * revision, and a 409 from the server means somebody else moved the
 * session first; callers are expected to refetch state, not retry blind.
 */

export type OutcomeSymbol = "win" | "draw" | "loss";

export type SessionStatus = "active" | "exhausted" | "finalized";

export interface DatasetInfo {
  id: string;
  n: number;
  m: number;
  baseline: string;
  model_ids: string[];
}

export interface SessionConfig {
  dataset_id: string;
  budget: number;
  eps_loss: number;
  eps_draw: number;
  strategy?: string;
  z?: number;
  seed?: number;
}

export interface SessionSummary {
  session_id: string;
  dataset_id: string;
  status: SessionStatus;
  revision: number;
  t: number;
  budget: number;
  budget_remaining: number;
  strategy: string;
  eps_loss: number;
  eps_draw: number;
  z: number;
  seed: number;
  posterior: Record<string, number>;
  entropy: number;
  leader: string | null;
  pending_query_id: string | null;
}

export interface Proposal {
  query_id: string;
  query_text: string;
  baseline_model: string;
  baseline_response: string;
  candidate_responses: Record<string, string>;
  budget_remaining: number;
  revision: number;
}

export interface JudgmentsPayload {
  query_id: string;
  outcomes: Record<string, OutcomeSymbol>;
  expected_revision: number;
}

export interface AnnotationEntry {
  query_id: string;
  outcomes: Record<string, OutcomeSymbol>;
}

export interface FinalReport {
  session_id: string;
  selected_model: string;
  win_rates: Record<string, number>;
  posterior: Record<string, number>;
  annotation_log: AnnotationEntry[];
  t: number;
}

/** Server said no: carries the HTTP status and the decoded detail line. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

/** Request never reached the server (or the response never came back). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`network failure: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function decodeDetail(body: unknown, fallback: string): string {
  if (body === null || typeof body !== "object") return fallback;
  const detail = (body as { detail?: unknown }).detail;
  if (typeof detail === "string") return detail;
  if (Array.isArray(detail)) {
    // FastAPI validation errors arrive as a list of {loc, msg, type}.
    const msgs = detail
      .map((item) =>
        item !== null && typeof item === "object" && "msg" in item
          ? String((item as { msg: unknown }).msg)
          : String(item),
      )
      .filter((msg) => msg.length > 0);
    if (msgs.length > 0) return msgs.join("; ");
  }
  return fallback;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) =>
      globalThis.fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new NetworkError(err);
    }
    if (!response.ok) {
      let decoded: unknown = null;
      try {
        decoded = await response.json();
      } catch {
        // non-JSON error body; fall back to the status text
      }
      throw new ApiError(
        response.status,
        decodeDetail(decoded, response.statusText || "request failed"),
      );
    }
    return (await response.json()) as T;
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return this.request("GET", "/datasets");
  }

  createSession(
    config: SessionConfig,
  ): Promise<{ session_id: string; state: SessionSummary }> {
    return this.request("POST", "/sessions", config);
  }

  getState(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  nextProposal(sessionId: string): Promise<Proposal> {
    return this.request("GET", `/sessions/${sessionId}/next`);
  }

  submitJudgments(
    sessionId: string,
    payload: JudgmentsPayload,
  ): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sessionId}/judgments`, payload);
  }

  finalize(sessionId: string): Promise<FinalReport> {
    return this.request("POST", `/sessions/${sessionId}/finalize`);
  }
}
