/** Typed client for the ptracer HTTP service. Every call goes through
 * the /api/* endpoints; this module is the UI's only contact with the
 * backend. */

export const REASON_CATEGORIES = [
  "non_bug_fix",
  "unrelated_module",
  "not_relevant_to_baseline",
  "missing_dependency",
  "other",
] as const;

export type ReasonCategory = (typeof REASON_CATEGORIES)[number];
export type VerdictStatus = "pending" | "accepted" | "rejected";

export interface Recommendation {
  sha: string;
  subject: string;
  raw_score: number;
  final_score: number;
  cc_stable: boolean;
  paths: string[];
  author_date: string;
  status: VerdictStatus;
  reason: ReasonCategory | null;
}

export interface FeedbackView {
  status: VerdictStatus;
  reason: ReasonCategory | null;
  note: string | null;
  reviewer: string | null;
  ts: string | null;
}

export interface PatchDetail {
  sha: string;
  subject: string;
  message: string;
  diff: string;
  raw_score: number;
  final_score: number;
  cc_stable: boolean;
  recommended: boolean;
  paths: string[];
  author: { name: string; email: string; date: string };
  feedback: FeedbackView;
}

export interface Stats {
  analyzed: number;
  concerned: number;
  recommended: number;
  accepted: number;
  rejected: number;
  rejected_by_reason: Record<string, number>;
}

export interface Job {
  id: string;
  kind: string;
  state: "queued" | "running" | "done" | "failed";
  detail: string | null;
  created: string | null;
  finished: string | null;
  result: unknown;
}

export interface FeedbackPayload {
  verdict: "accepted" | "rejected";
  reason?: ReasonCategory;
  note?: string;
  reviewer?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) {
      // the service wraps domain errors as {"error": {code, detail}}
      let code = "http_error";
      let detail = `${resp.status} ${resp.statusText}`;
      try {
        const body = await resp.json();
        if (body && body.error) {
          code = body.error.code ?? code;
          detail = body.error.detail ?? detail;
        }
      } catch {
        // non-JSON error body: keep the status line
      }
      throw new ApiError(resp.status, code, detail);
    }
    return (await resp.json()) as T;
  }

  recommendations(window?: { since?: string; until?: string }): Promise<Recommendation[]> {
    const params = new URLSearchParams();
    if (window?.since) params.set("since", window.since);
    if (window?.until) params.set("until", window.until);
    const qs = params.toString();
    return this.request<Recommendation[]>(`/api/recommendations${qs ? "?" + qs : ""}`);
  }

  patch(sha: string): Promise<PatchDetail> {
    return this.request<PatchDetail>(`/api/patches/${sha}`);
  }

  submitFeedback(sha: string, payload: FeedbackPayload): Promise<{ sha: string; status: string }> {
    return this.request(`/api/patches/${sha}/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  stats(): Promise<Stats> {
    return this.request<Stats>("/api/stats");
  }

  runIngest(): Promise<Job> {
    return this.request<Job>("/api/ingest/run", { method: "POST" });
  }

  runRetrain(): Promise<Job> {
    return this.request<Job>("/api/retrain", { method: "POST" });
  }

  job(id: string): Promise<Job> {
    return this.request<Job>(`/api/jobs/${id}`);
  }

  /** Poll a job record until it leaves the queue. */
  async waitForJob(id: string, pollMs = 500, timeoutMs = 120_000): Promise<Job> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.job(id);
      if (job.state === "done" || job.state === "failed") return job;
      if (Date.now() > deadline) throw new Error(`job ${id} still ${job.state} after ${timeoutMs}ms`);
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }
}
