/** HTML string rendering. Pure functions of API data, so the views are
 * testable without a browser; app.ts assigns the results to innerHTML. */
import { REASON_CATEGORIES } from "./api.js";
import { diffStats, parseDiffLines } from "./diff.js";
export function escapeHtml(text) {
    return text
        .replaceAll("&", "&amp;")
        .replaceAll("<", "&lt;")
        .replaceAll(">", "&gt;")
        .replaceAll('"', "&quot;")
        .replaceAll("'", "&#39;");
}
function statusChip(status, reason) {
    const label = reason ? `${status}: ${reason}` : status;
    return `<span class="chip chip-${escapeHtml(status)}">${escapeHtml(label)}</span>`;
}
function scoreCell(rec) {
    const pct = Math.round(rec.final_score * 100);
    const boosted = rec.final_score > rec.raw_score;
    const title = boosted
        ? `raw ${rec.raw_score.toFixed(3)}, revised to ${rec.final_score.toFixed(3)}`
        : `score ${rec.final_score.toFixed(3)}`;
    return (`<div class="score" title="${escapeHtml(title)}">` +
        `<div class="score-bar" style="width:${pct}%"></div>` +
        `<span class="score-num">${rec.final_score.toFixed(3)}</span></div>`);
}
export function renderQueue(rows, selectedSha = null) {
    if (rows.length === 0) {
        return `<p class="empty">No recommendations in this window.</p>`;
    }
    const body = rows
        .map((rec, i) => {
        const selected = rec.sha === selectedSha ? " selected" : "";
        const cc = rec.cc_stable ? `<span class="chip chip-cc">cc-stable</span>` : "";
        return (`<tr class="queue-row${selected}" data-sha="${escapeHtml(rec.sha)}">` +
            `<td class="num">${i + 1}</td>` +
            `<td class="mono">${escapeHtml(rec.sha.slice(0, 12))}</td>` +
            `<td class="subject">${escapeHtml(rec.subject)} ${cc}</td>` +
            `<td>${scoreCell(rec)}</td>` +
            `<td>${statusChip(rec.status, rec.reason)}</td></tr>`);
    })
        .join("");
    return (`<table class="queue"><thead><tr>` +
        `<th>#</th><th>commit</th><th>subject</th><th>score</th><th>verdict</th>` +
        `</tr></thead><tbody>${body}</tbody></table>`);
}
export function renderDiff(diff) {
    const lines = parseDiffLines(diff);
    const { added, removed } = diffStats(lines);
    const rows = lines
        .map((l) => `<div class="line line-${l.kind}">${escapeHtml(l.text) || "&nbsp;"}</div>`)
        .join("");
    return (`<div class="diff-stats"><span class="plus">+${added}</span> ` +
        `<span class="minus">-${removed}</span></div>` +
        `<div class="diff">${rows}</div>`);
}
export function renderRejectForm(sha) {
    const options = REASON_CATEGORIES.map((r) => `<option value="${r}">${r.replaceAll("_", " ")}</option>`).join("");
    return (`<form class="reject-form" data-sha="${escapeHtml(sha)}">` +
        `<select name="reason" required>${options}</select>` +
        `<input name="reviewer" placeholder="reviewer" />` +
        `<input name="note" placeholder="note (optional)" />` +
        `<button type="submit" class="btn btn-reject">Reject</button></form>`);
}
export function renderDetail(p) {
    const verdict = p.feedback.status === "pending"
        ? `<div class="verdict-actions" data-sha="${escapeHtml(p.sha)}">` +
            `<button class="btn btn-accept" data-action="accept">Accept for backport</button>` +
            renderRejectForm(p.sha) +
            `</div>`
        : `<div class="verdict-done">${statusChip(p.feedback.status, p.feedback.reason)}` +
            (p.feedback.note ? ` <span class="note">${escapeHtml(p.feedback.note)}</span>` : "") +
            `</div>`;
    return (`<article class="detail">` +
        `<h2>${escapeHtml(p.subject)}</h2>` +
        `<p class="meta mono">${escapeHtml(p.sha)}</p>` +
        `<p class="meta">${escapeHtml(p.author.name)} &lt;${escapeHtml(p.author.email)}&gt; · ` +
        `${escapeHtml(p.author.date)}</p>` +
        `<p class="meta">raw ${p.raw_score.toFixed(3)} · final ${p.final_score.toFixed(3)}` +
        (p.cc_stable ? ` · <span class="chip chip-cc">cc-stable</span>` : "") +
        `</p>` +
        verdict +
        `<pre class="message">${escapeHtml(p.message)}</pre>` +
        renderDiff(p.diff) +
        `</article>`);
}
export function renderStats(s) {
    const reasons = Object.entries(s.rejected_by_reason)
        .sort((a, b) => b[1] - a[1])
        .map(([reason, n]) => `<li>${escapeHtml(reason)}: ${n}</li>`)
        .join("");
    return (`<div class="stats">` +
        `<span>analyzed <b>${s.analyzed}</b></span><span class="arrow">→</span>` +
        `<span>concerned <b>${s.concerned}</b></span><span class="arrow">→</span>` +
        `<span>recommended <b>${s.recommended}</b></span><span class="arrow">→</span>` +
        `<span class="ok">accepted <b>${s.accepted}</b></span>` +
        `<span class="bad">rejected <b>${s.rejected}</b></span>` +
        (reasons ? `<ul class="reasons">${reasons}</ul>` : "") +
        `</div>`);
}
export function renderError(message) {
    return `<div class="banner banner-error">${escapeHtml(message)}</div>`;
}
export function renderNotice(message) {
    return `<div class="banner banner-info">${escapeHtml(message)}</div>`;
}
