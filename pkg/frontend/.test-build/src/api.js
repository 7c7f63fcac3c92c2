/** Typed client for the ptracer HTTP service. Every call goes through
 * the /api/* endpoints; this module is the UI's only contact with the
 * backend. */
export const REASON_CATEGORIES = [
    "non_bug_fix",
    "unrelated_module",
    "not_relevant_to_baseline",
    "missing_dependency",
    "other",
];
export class ApiError extends Error {
    status;
    code;
    detail;
    constructor(status, code, detail) {
        super(`${code}: ${detail}`);
        this.status = status;
        this.code = code;
        this.detail = detail;
        this.name = "ApiError";
    }
}
export class ApiClient {
    baseUrl;
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    async request(path, init) {
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
            }
            catch {
                // non-JSON error body: keep the status line
            }
            throw new ApiError(resp.status, code, detail);
        }
        return (await resp.json());
    }
    recommendations(window) {
        const params = new URLSearchParams();
        if (window?.since)
            params.set("since", window.since);
        if (window?.until)
            params.set("until", window.until);
        const qs = params.toString();
        return this.request(`/api/recommendations${qs ? "?" + qs : ""}`);
    }
    patch(sha) {
        return this.request(`/api/patches/${sha}`);
    }
    submitFeedback(sha, payload) {
        return this.request(`/api/patches/${sha}/feedback`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(payload),
        });
    }
    stats() {
        return this.request("/api/stats");
    }
    runIngest() {
        return this.request("/api/ingest/run", { method: "POST" });
    }
    runRetrain() {
        return this.request("/api/retrain", { method: "POST" });
    }
    job(id) {
        return this.request(`/api/jobs/${id}`);
    }
    /** Poll a job record until it leaves the queue. */
    async waitForJob(id, pollMs = 500, timeoutMs = 120_000) {
        const deadline = Date.now() + timeoutMs;
        for (;;) {
            const job = await this.job(id);
            if (job.state === "done" || job.state === "failed")
                return job;
            if (Date.now() > deadline)
                throw new Error(`job ${id} still ${job.state} after ${timeoutMs}ms`);
            await new Promise((r) => setTimeout(r, pollMs));
        }
    }
}
