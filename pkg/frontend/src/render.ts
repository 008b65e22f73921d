/** Pure HTML renderers: state in, markup out. Keeping these DOM-free makes
 * the blindness and ordering guarantees directly testable. */

import { canSubmit } from "./state.js";
import type { UIItemView, Verdict } from "./types.js";
import { VERDICTS } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Instruction text is shown verbatim (escaped, never reflowed or edited). */
export function renderInstructions(text: string): string {
  return `<pre class="instructions">${escapeHtml(text)}</pre>`;
}

function renderVerdictControl(candidateId: string, selected: Verdict | undefined): string {
  const buttons = VERDICTS.map((v) => {
    const pressed = selected === v ? ' aria-pressed="true"' : "";
    return `<button data-candidate="${escapeHtml(candidateId)}" data-verdict="${v}"${pressed}>${v}</button>`;
  });
  return `<span class="verdict" role="group">${buttons.join("")}</span>`;
}

/** Context first, then question + ground truth, then candidates in
 * server-provided order. Nothing about arms or strategies ever renders. */
export function renderItem(view: UIItemView): string {
  const { item, drafts } = view;
  const candidates = item.candidates
    .map(
      (c) =>
        `<li class="candidate">` +
        `<span class="answer">${escapeHtml(c.answer_text)}</span>` +
        renderVerdictControl(c.candidate_id, drafts.get(c.candidate_id)) +
        `</li>`,
    )
    .join("");
  const disabled = canSubmit(view) ? "" : " disabled";
  return (
    `<section class="item" lang="${escapeHtml(item.language)}">` +
    `<div class="context">${escapeHtml(item.context)}</div>` +
    `<div class="question">${escapeHtml(item.question)}</div>` +
    `<div class="ground-truth">${escapeHtml(item.ground_truth)}</div>` +
    `<ol class="candidates">${candidates}</ol>` +
    `<button class="submit"${disabled}>Submit</button>` +
    `</section>`
  );
}

export function renderProgress(submitted: number): string {
  return `<div class="progress">Items annotated: ${submitted}</div>`;
}

export function renderDone(submitted: number): string {
  return `<div class="done">All items annotated. Total: ${submitted}. Thank you!</div>`;
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner">${escapeHtml(message)} <button class="retry">Retry</button></div>`;
}
