/** Pure HTML renderers. Everything here is a function from wire data to a
 * markup string, so component tests run without a browser. */

import { DiffSpan, diffWords } from "./diff.js";
import { Feedback, StageOutcome, STAGES, StageName, Trace, ViewTurn } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const STAGE_LABELS: Record<StageName, string> = {
  query_generation: "Query generation",
  retrieval: "Retrieval",
  summarization: "Summarization",
  generation: "LLM response",
  claim_splitting: "Claim splitting",
  verification: "Verification",
  refinement: "Draft & refine",
};

export function verdictBadge(label: string): string {
  const cls =
    label === "SUPPORTS" ? "supports" : label === "REFUTES" ? "refutes" : "nei";
  const text = label.replace(/_/g, " ");
  return `<span class="badge badge-${cls}">${escapeHtml(text)}</span>`;
}

export function renderBubblePair(turn: ViewTurn): string {
  const traceButton =
    turn.turnIndex === null
      ? ""
      : `<button class="show-trace" data-turn="${turn.turnIndex}">inspect turn</button>`;
  return (
    `<div class="exchange" data-turn="${turn.turnIndex ?? ""}">` +
    `<div class="bubble user">${escapeHtml(turn.user)}</div>` +
    `<div class="bubble agent">${escapeHtml(turn.agent)}${traceButton}</div>` +
    `</div>`
  );
}

/** Progress steps light up in pipeline order as stage events arrive. */
export function renderProgress(done: string[], inFlight: boolean): string {
  if (!inFlight && done.length === 0) return "";
  const steps = STAGES.map((stage) => {
    const state = done.includes(stage) ? "done" : "pending";
    return `<li class="step ${state}" data-stage="${stage}">${escapeHtml(STAGE_LABELS[stage])}</li>`;
  });
  return `<ol class="progress">${steps.join("")}</ol>`;
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner" role="alert">${escapeHtml(message)}</div>`;
}

export function renderDiff(before: string, after: string): string {
  const spans = diffWords(before, after)
    .map((span: DiffSpan) => `<span class="diff-${span.kind}">${escapeHtml(span.text)}</span>`)
    .join("");
  return `<div class="diff">${spans}</div>`;
}

export function renderFeedback(feedback: Feedback | null): string {
  if (feedback === null) return `<p class="muted">no feedback scores (refine fell back to the draft)</p>`;
  const rows = (
    [
      ["Relevant", feedback.relevant, "relevant"],
      ["Conversational", feedback.conversational, "conversational"],
      ["Non-Repetitive", feedback.non_repetitive, "non_repetitive"],
      ["Temporally Correct", feedback.temporally_correct, "temporally_correct"],
    ] as const
  ).map(
    ([label, score, key]) =>
      `<li class="score-row"><span class="score-label">${label}</span>` +
      `<span class="score-value">${score}/100</span>` +
      `<span class="score-rationale">${escapeHtml(feedback.rationales[key] ?? "")}</span></li>`
  );
  return `<ul class="feedback-scores">${rows.join("")}</ul>`;
}

function panel(stage: StageName, outcome: StageOutcome | undefined, body: string): string {
  const skipped = outcome?.skipped ?? false;
  const fallback = outcome?.fallback_used ?? false;
  const flags = [
    skipped ? `<span class="flag flag-skipped">skipped</span>` : "",
    fallback && !skipped ? `<span class="flag flag-fallback">fallback</span>` : "",
  ].join("");
  const content = skipped ? `<p class="muted">stage skipped for this turn</p>` : body;
  return (
    `<details class="stage-panel${skipped ? " skipped" : ""}" data-stage="${stage}">` +
    `<summary>${escapeHtml(STAGE_LABELS[stage])}${flags}</summary>` +
    `<div class="panel-body">${content}</div></details>`
  );
}

function passageList(trace: Trace): string {
  if (trace.reranked.length === 0) return `<p class="muted">no passages</p>`;
  const items = trace.reranked.map(
    (p) =>
      `<li class="passage"><strong>${escapeHtml(p.title)}</strong>` +
      `<span class="meta"> #${p.rank} · score ${p.score.toFixed(3)}${p.date ? " · " + escapeHtml(p.date) : ""}</span>` +
      `<p>${escapeHtml(p.body)}</p></li>`
  );
  return `<p class="meta">${trace.reranked.length} of ${trace.retrieved.length} retrieved passages kept</p>` +
    `<ul class="passages">${items.join("")}</ul>`;
}

function bulletList(texts: string[]): string {
  if (texts.length === 0) return `<p class="muted">no bullets</p>`;
  return `<ul class="bullets">${texts.map((t) => `<li>${escapeHtml(t)}</li>`).join("")}</ul>`;
}

function claimRows(trace: Trace): string {
  if (trace.claims.length === 0) return `<p class="muted">no factual claims extracted</p>`;
  const rows = trace.claims.map(({ claim, verdict }) => {
    const evidence = verdict.evidence
      .map((p) => `<li>${escapeHtml(p.title)}</li>`)
      .join("");
    return (
      `<li class="claim-row">${verdictBadge(verdict.label)}` +
      `<span class="claim-text">${escapeHtml(claim.text)}</span>` +
      `<span class="meta">time: ${escapeHtml(String(claim.time))}</span>` +
      (verdict.reasoning ? `<p class="reasoning">${escapeHtml(verdict.reasoning)}</p>` : "") +
      (evidence ? `<ul class="evidence">${evidence}</ul>` : "") +
      `</li>`
    );
  });
  return `<ul class="claims">${rows.join("")}</ul>`;
}

/** Collapsible panels, one per pipeline stage, for one turn's trace. */
export function renderTracePanels(trace: Trace): string {
  const outcomes = new Map(trace.stages.map((s) => [s.stage, s]));
  const decision = trace.search_decision;
  const queryBody = decision
    ? `<p>query: <code>${escapeHtml(decision.query)}</code> · time: <code>${escapeHtml(String(decision.time))}</code></p>`
    : `<p class="muted">no search needed this turn</p>`;
  const panels = [
    panel("query_generation", outcomes.get("query_generation"), queryBody),
    panel("retrieval", outcomes.get("retrieval"), passageList(trace)),
    panel(
      "summarization",
      outcomes.get("summarization"),
      bulletList(trace.summary_bullets.map((b) => b.text))
    ),
    panel(
      "generation",
      outcomes.get("generation"),
      `<p>${escapeHtml(trace.llm_response)}</p>`
    ),
    panel(
      "claim_splitting",
      outcomes.get("claim_splitting"),
      bulletList(trace.claims.map(({ claim }) => claim.text))
    ),
    panel("verification", outcomes.get("verification"), claimRows(trace)),
    panel(
      "refinement",
      outcomes.get("refinement"),
      renderFeedback(trace.feedback) + renderDiff(trace.draft, trace.final)
    ),
  ];
  return `<div class="trace">${panels.join("")}</div>`;
}

export function renderTraceUnavailable(): string {
  return `<div class="trace"><p class="muted">no trace recorded for this turn</p></div>`;
}
