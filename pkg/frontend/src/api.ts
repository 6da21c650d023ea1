// Typed client for the annotation service's HTTP API. Pure request/response
// plumbing: no retries, no state. The app layer owns backoff and the
// offline queue.

export interface Card {
  card_id: string;
  entity: string;
  name: string;
  description: string;
  relations: string[];
  queried_type: string;
  model_score: number;
}

export interface QueueResponse {
  cards: Card[];
  round_id?: number;
  retry_after?: number;
  complete: boolean;
}

export type Verdict = "correct" | "error" | "skip";

export interface VerdictSubmission {
  card_id: string;
  verdict: Verdict;
  true_type?: string | null;
}

export interface CommitAck {
  committed: { card_id: string; seq: number }[];
  rejected: { card_id: string; reason: string }[];
}

export interface Progress {
  session_id: string;
  strategy: string;
  budget: number;
  budget_remaining: number;
  committed: number;
  pending_cards: number;
  complete: boolean;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseJson(response: Response): Promise<unknown> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response.json();
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(
    manifestDigest: string,
    budget: number,
    sessionId?: string,
  ): Promise<{ session_id: string; budget: number }> {
    const response = await this.fetchImpl(this.url("/session"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ manifest_digest: manifestDigest, budget, session_id: sessionId ?? null }),
    });
    return (await parseJson(response)) as { session_id: string; budget: number };
  }

  async fetchQueue(sessionId: string): Promise<QueueResponse> {
    const response = await this.fetchImpl(this.url(`/session/${sessionId}/queue`));
    return (await parseJson(response)) as QueueResponse;
  }

  async commitVerdicts(
    sessionId: string,
    verdicts: VerdictSubmission[],
    annotatorId = "ui",
  ): Promise<CommitAck> {
    const response = await this.fetchImpl(this.url(`/session/${sessionId}/labels`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ verdicts, annotator_id: annotatorId }),
    });
    return (await parseJson(response)) as CommitAck;
  }

  async fetchProgress(sessionId: string): Promise<Progress> {
    const response = await this.fetchImpl(this.url(`/session/${sessionId}/progress`));
    return (await parseJson(response)) as Progress;
  }
}
