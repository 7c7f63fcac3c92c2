/** Bootstrap: wires the rendered views to the API client. All state is
 * server-side; every mutation re-reads, so the page never goes stale. */
import { ApiClient, ApiError } from "./api.js";
import { renderDetail, renderError, renderNotice, renderQueue, renderStats, } from "./render.js";
const api = new ApiClient();
let selectedSha = null;
function panel(id) {
    const el = document.getElementById(id);
    if (!el)
        throw new Error(`missing #${id} in index.html`);
    return el;
}
function showBanner(html) {
    panel("banner").innerHTML = html;
}
function describe(err) {
    if (err instanceof ApiError)
        return `${err.code}: ${err.detail}`;
    return String(err);
}
async function refreshQueue() {
    const rows = await api.recommendations();
    panel("queue").innerHTML = renderQueue(rows, selectedSha);
    panel("stats").innerHTML = renderStats(await api.stats());
}
async function select(sha) {
    selectedSha = sha;
    panel("detail").innerHTML = renderNotice("loading…");
    try {
        panel("detail").innerHTML = renderDetail(await api.patch(sha));
        const rows = await api.recommendations();
        panel("queue").innerHTML = renderQueue(rows, selectedSha);
    }
    catch (err) {
        panel("detail").innerHTML = renderError(describe(err));
    }
}
async function verdict(sha, verdictValue, reason, note, reviewer) {
    try {
        await api.submitFeedback(sha, { verdict: verdictValue, reason, note, reviewer });
        showBanner(renderNotice(`recorded ${verdictValue} for ${sha.slice(0, 12)}`));
        await select(sha); // re-read: the server is the source of truth
        await refreshQueue();
    }
    catch (err) {
        showBanner(renderError(describe(err)));
    }
}
async function runJob(kind) {
    try {
        const started = kind === "ingest" ? await api.runIngest() : await api.runRetrain();
        showBanner(renderNotice(`${kind} ${started.id} started…`));
        const job = await api.waitForJob(started.id);
        if (job.state === "failed") {
            showBanner(renderError(`${kind} ${job.id} failed: ${job.detail ?? "unknown"}`));
        }
        else {
            showBanner(renderNotice(`${kind} ${job.id} finished`));
        }
        await refreshQueue();
    }
    catch (err) {
        showBanner(renderError(describe(err)));
    }
}
function wireEvents() {
    panel("queue").addEventListener("click", (ev) => {
        const row = ev.target.closest("tr[data-sha]");
        if (row?.dataset.sha)
            void select(row.dataset.sha);
    });
    panel("detail").addEventListener("click", (ev) => {
        const btn = ev.target.closest('[data-action="accept"]');
        if (!btn)
            return;
        const holder = btn.closest("[data-sha]");
        if (holder?.dataset.sha)
            void verdict(holder.dataset.sha, "accepted");
    });
    panel("detail").addEventListener("submit", (ev) => {
        const form = ev.target;
        if (!form.classList.contains("reject-form"))
            return;
        ev.preventDefault();
        const sha = form.dataset.sha;
        if (!sha)
            return;
        const data = new FormData(form);
        void verdict(sha, "rejected", data.get("reason") ?? undefined, data.get("note") || undefined, data.get("reviewer") || undefined);
    });
    panel("run-ingest").addEventListener("click", () => void runJob("ingest"));
    panel("run-retrain").addEventListener("click", () => void runJob("retrain"));
}
async function main() {
    wireEvents();
    try {
        await refreshQueue();
    }
    catch (err) {
        showBanner(renderError(describe(err)));
    }
}
void main();
