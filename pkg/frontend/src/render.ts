/** Pure HTML renderers: service payload in, markup out.
 *
 * Nothing here computes retrieval values; every number shown is the exact
 * payload value (String(n) of the JSON number), which the snapshot tests
 * pin against recorded responses.
 */

import type { ApiErrorBody, QueryResponse, RankedEntry } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function countBadge(entry: RankedEntry, totalPropositions: number): string {
  if (entry.stage2_count === null || entry.stage2_count === undefined) {
    return `<span class="badge badge-count badge-muted" title="not verified">–</span>`;
  }
  if (entry.stage2_count === -1) {
    return `<span class="badge badge-count badge-failed" title="verification failed">failed</span>`;
  }
  return `<span class="badge badge-count" title="satisfied propositions">${entry.stage2_count}/${totalPropositions}</span>`;
}

function evaluatorBadge(entry: RankedEntry): string {
  if (entry.stage3_flag === true) {
    return `<span class="badge badge-eval badge-accepted" title="evaluator accepted">✓</span>`;
  }
  if (entry.stage3_flag === false) {
    return `<span class="badge badge-eval badge-rejected" title="evaluator rejected">✗</span>`;
  }
  return "";
}

/** Result grid: one card per entry, in payload order. */
export function renderResultGrid(payload: QueryResponse, imageUrl: (id: string) => string): string {
  const total = payload.trace.propositions.length;
  const cards = payload.ranking.map((entry, position) => {
    const promoted = position === 0 && entry.stage3_flag === true;
    const classes = promoted ? "card promoted" : "card";
    return [
      `<figure class="${classes}" data-image-id="${escapeHtml(entry.image_id)}">`,
      `<img src="${escapeHtml(imageUrl(entry.image_id))}" alt="${escapeHtml(entry.image_id)}" loading="lazy">`,
      `<figcaption>`,
      `<span class="image-id">${escapeHtml(entry.image_id)}</span>`,
      `<span class="badge badge-score" title="stage-1 fused score">${String(entry.stage1_score)}</span>`,
      countBadge(entry, total),
      evaluatorBadge(entry),
      promoted ? `<span class="badge badge-promoted" title="promoted by the evaluator">top pick</span>` : "",
      `</figcaption>`,
      `</figure>`,
    ]
      .filter(Boolean)
      .join("");
  });
  return `<div class="grid">${cards.join("")}</div>`;
}

/** Chat history: user feedback plus the system's current understanding. */
export interface ChatRound {
  userText: string;
  synthesis: string | null;
  round: number;
}

export function renderChatHistory(rounds: ChatRound[]): string {
  const blocks = rounds.map((r) =>
    [
      `<div class="turn" data-round="${r.round}">`,
      `<div class="bubble user"><span class="round-no">${r.round}</span>${escapeHtml(r.userText)}</div>`,
      r.synthesis !== null
        ? `<div class="bubble system" title="current understanding">${escapeHtml(r.synthesis)}</div>`
        : "",
      `</div>`,
    ]
      .filter(Boolean)
      .join(""),
  );
  return `<div class="chat-history">${blocks.join("")}</div>`;
}

const INSTRUCTION_KINDS = ["Addition", "Removal", "Modification", "Comparison", "Retention"];

/** Trace drawer: instructions, descriptions, propositions with answers. */
export function renderTraceDrawer(payload: QueryResponse): string {
  const trace = payload.trace;
  const sections: string[] = [];

  const instructionItems = trace.atomic_instructions
    .map(
      (inst) =>
        `<li class="kind-${inst.kind.toLowerCase()}"><span class="kind-label">${inst.kind}</span> ${escapeHtml(inst.text)}</li>`,
    )
    .join("");
  const legend = INSTRUCTION_KINDS.map(
    (kind) => `<span class="kind-chip kind-${kind.toLowerCase()}">${kind}</span>`,
  ).join("");
  sections.push(
    `<section class="trace-instructions"><h3>Atomic instructions</h3><div class="legend">${legend}</div><ul>${instructionItems}</ul></section>`,
  );

  if (trace.descriptions) {
    sections.push(
      `<section class="trace-descriptions"><h3>Target descriptions</h3><dl>` +
        `<dt>Core elements</dt><dd>${escapeHtml(trace.descriptions.core_elements)}</dd>` +
        `<dt>Enhanced details</dt><dd>${escapeHtml(trace.descriptions.enhanced_details)}</dd>` +
        `<dt>Comprehensive synthesis</dt><dd>${escapeHtml(trace.descriptions.comprehensive_synthesis)}</dd>` +
        `</dl></section>`,
    );
  }

  if (payload.verification && payload.verification.propositions.length > 0) {
    const matrix = payload.verification;
    const header =
      `<tr><th>proposition</th><th>truth</th>` +
      matrix.candidate_ids.map((id) => `<th>${escapeHtml(id)}</th>`).join("") +
      `</tr>`;
    const rows = matrix.propositions
      .map((prop, i) => {
        const cells = matrix.answers
          .map((row) => `<td class="answer-${row[i].toLowerCase()}">${row[i]}</td>`)
          .join("");
        return `<tr><td>${escapeHtml(prop.question)}</td><td>${prop.truth_value ? "True" : "False"}</td>${cells}</tr>`;
      })
      .join("");
    const counts =
      `<tr class="counts-row"><td>satisfied</td><td></td>` +
      matrix.counts.map((c) => `<td>${String(c)}</td>`).join("") +
      `</tr>`;
    sections.push(
      `<section class="trace-verification"><h3>Propositions × candidates</h3>` +
        `<table>${header}${rows}${counts}</table></section>`,
    );
  }

  if (trace.evaluator_verdicts.length > 0) {
    const items = trace.evaluator_verdicts
      .map(
        (v) =>
          `<li class="${v.accepted ? "verdict-yes" : "verdict-no"}"><b>${escapeHtml(v.image_id)}</b>: ` +
          `${v.accepted ? "accepted" : "rejected"} — ${escapeHtml(v.justification)}</li>`,
      )
      .join("");
    sections.push(`<section class="trace-verdicts"><h3>Evaluator verdicts</h3><ul>${items}</ul></section>`);
  }

  if (trace.notes.length > 0) {
    const items = trace.notes.map((n) => `<li>${escapeHtml(n)}</li>`).join("");
    sections.push(`<section class="trace-notes"><h3>Notes</h3><ul>${items}</ul></section>`);
  }

  return `<div class="trace-drawer">${sections.join("")}</div>`;
}

export function renderErrorBanner(error: ApiErrorBody): string {
  return (
    `<div class="banner banner-error" role="alert">` +
    `<span class="code">${escapeHtml(error.code)}</span> ${escapeHtml(error.message)}</div>`
  );
}

export function renderReferencePreview(dataUrl: string | null): string {
  if (!dataUrl) return `<div class="ref-preview empty">no reference image</div>`;
  return `<div class="ref-preview"><img src="${escapeHtml(dataUrl)}" alt="reference image"></div>`;
}
