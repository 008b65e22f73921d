/** Annotation session state machine, independent of the DOM.
 *
 * Flow: select language -> open session -> loop (fetch next, set a verdict
 * per candidate, submit) -> completion screen. Submit stays disabled until
 * every candidate has a verdict; a lease lost mid-item (another session took
 * it over) refetches the item while keeping the local drafts.
 */

import { AnnotationApi, ApiError } from "./api.js";
import type { SubmitAck, UIItemView, Verdict } from "./types.js";

export type Phase = "idle" | "annotating" | "done" | "error";

/** Keyboard shortcuts: Y / P / N (case-insensitive). */
export function verdictForKey(key: string): Verdict | null {
  switch (key.toLowerCase()) {
    case "y":
      return "Yes";
    case "p":
      return "Partial";
    case "n":
      return "No";
    default:
      return null;
  }
}

export function canSubmit(view: UIItemView): boolean {
  return view.item.candidates.every((c) => view.drafts.has(c.candidate_id));
}

export function missingVerdicts(view: UIItemView): string[] {
  return view.item.candidates
    .filter((c) => !view.drafts.has(c.candidate_id))
    .map((c) => c.candidate_id);
}

export class AnnotatorSession {
  phase: Phase = "idle";
  view: UIItemView | null = null;
  instructions = "";
  submitted = 0;
  lastError: string | null = null;
  private sessionId = "";
  private submitting = false;

  constructor(private readonly api: AnnotationApi) {}

  /** Open a session scoped to one language and fetch the first item. */
  async start(language: string, annotatorId = "anon"): Promise<void> {
    this.instructions = (await this.api.instructions()).text;
    const session = await this.api.openSession(language, annotatorId);
    this.sessionId = session.session_id;
    await this.fetchNext();
  }

  async fetchNext(): Promise<void> {
    try {
      const response = await this.api.next(this.sessionId);
      if (response.done || !response.item) {
        this.phase = "done";
        this.view = null;
        return;
      }
      // candidates stay in server-provided order; drafts start empty unless
      // we are refetching the same item after a lease hiccup
      const drafts =
        this.view && this.view.item.item_id === response.item.item_id
          ? this.view.drafts
          : new Map<string, Verdict>();
      this.view = { item: response.item, drafts };
      this.phase = "annotating";
      this.lastError = null;
    } catch (err) {
      this.phase = "error";
      this.lastError = err instanceof Error ? err.message : String(err);
    }
  }

  setVerdict(candidateId: string, verdict: Verdict): void {
    if (!this.view) return;
    if (!this.view.item.candidates.some((c) => c.candidate_id === candidateId)) {
      throw new Error(`unknown candidate ${candidateId}`);
    }
    this.view.drafts.set(candidateId, verdict);
  }

  /** Apply a keyboard shortcut to one candidate (Y/P/N). */
  keyVerdict(candidateId: string, key: string): boolean {
    const verdict = verdictForKey(key);
    if (verdict === null) return false;
    this.setVerdict(candidateId, verdict);
    return true;
  }

  /** Submit the current item; no-op while incomplete or already in flight. */
  async submit(): Promise<SubmitAck | null> {
    if (!this.view || !canSubmit(this.view) || this.submitting) {
      return null;
    }
    const { item, drafts } = this.view;
    const verdicts: Record<string, Verdict> = {};
    for (const [cid, verdict] of drafts) {
      verdicts[cid] = verdict;
    }
    this.submitting = true;
    try {
      const ack = await this.api.submit(this.sessionId, item.item_id, verdicts);
      this.submitted += 1;
      this.view = null; // no revision after submit
      await this.fetchNext();
      return ack;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // lease expired: refetch (drafts preserved because the item id matches)
        await this.fetchNext();
        return null;
      }
      this.phase = "error";
      this.lastError = err instanceof Error ? err.message : String(err);
      return null;
    } finally {
      this.submitting = false;
    }
  }
}
