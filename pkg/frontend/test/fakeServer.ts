/** In-memory stand-in for the annotation HTTP API, faithful to the server's
 * semantics: deterministic queue, per-session leases, idempotent submits,
 * HA-score rewards (Yes=1, No=0, Partial=token F1 vs ground truth). */

import type { FetchLike } from "../src/api.js";
import type { ItemPayload, SubmitAck, Verdict } from "../src/types.js";

const INSTRUCTIONS = "Mark Yes if the answer is absolutely correct.\nMinor punctuation errors are allowed.\n";

function tokenF1(pred: string, truth: string): number {
  const a = pred.split(/\s+/).filter(Boolean);
  const b = truth.split(/\s+/).filter(Boolean);
  if (a.length === 0 && b.length === 0) return 1;
  const counts = new Map<string, number>();
  for (const tok of b) counts.set(tok, (counts.get(tok) ?? 0) + 1);
  let common = 0;
  for (const tok of a) {
    const left = counts.get(tok) ?? 0;
    if (left > 0) {
      common += 1;
      counts.set(tok, left - 1);
    }
  }
  if (common === 0) return 0;
  const p = common / a.length;
  const r = common / b.length;
  return (2 * p * r) / (p + r);
}

export class FakeServer {
  sessions = 0;
  submits = 0;
  events: { candidate_id: string; reward: number }[] = [];
  private leases = new Map<string, string>(); // item_id -> session_id
  private judged = new Set<string>();
  private acks = new Map<string, SubmitAck>(); // `${session}:${item}`
  /** When true, the next submit is rejected with 409 (lease stolen). */
  failNextSubmitWith409 = false;

  constructor(private readonly items: ItemPayload[]) {}

  private json(body: unknown, status = 200): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://test");
    if (url.pathname === "/annotation/instructions") {
      return this.json({ text: INSTRUCTIONS });
    }
    if (url.pathname === "/annotation/session") {
      this.sessions += 1;
      const { language } = JSON.parse(String(init?.body));
      return this.json({ session_id: `session-${this.sessions}`, language });
    }
    if (url.pathname === "/annotation/next") {
      const session = url.searchParams.get("session")!;
      for (const item of this.items) {
        if (this.judged.has(item.item_id)) continue;
        const lease = this.leases.get(item.item_id);
        if (lease !== undefined && lease !== session) continue;
        this.leases.set(item.item_id, session);
        return this.json({ done: false, item });
      }
      return this.json({ done: true });
    }
    if (url.pathname === "/annotation/submit") {
      this.submits += 1;
      const { session, item_id, verdicts } = JSON.parse(String(init?.body)) as {
        session: string;
        item_id: string;
        verdicts: Record<string, Verdict>;
      };
      const ackKey = `${session}:${item_id}`;
      const existing = this.acks.get(ackKey);
      if (existing) return this.json(existing);
      if (this.failNextSubmitWith409) {
        this.failNextSubmitWith409 = false;
        this.leases.delete(item_id);
        return this.json({ detail: `item ${item_id} is not leased to ${session}` }, 409);
      }
      const item = this.items.find((i) => i.item_id === item_id)!;
      const missing = item.candidates
        .filter((c) => !(c.candidate_id in verdicts))
        .map((c) => c.candidate_id);
      if (missing.length > 0) {
        return this.json({ detail: { error: "missing verdicts", candidates: missing } }, 400);
      }
      const rewards: Record<string, number> = {};
      for (const cand of item.candidates) {
        const verdict = verdicts[cand.candidate_id]!;
        const reward =
          verdict === "Yes" ? 1 : verdict === "No" ? 0 : tokenF1(cand.answer_text, item.ground_truth);
        rewards[cand.candidate_id] = reward;
        this.events.push({ candidate_id: cand.candidate_id, reward });
      }
      this.judged.add(item_id);
      const ack: SubmitAck = { item_id, accepted: item.candidates.length, rewards, rescored_f1: {} };
      this.acks.set(ackKey, ack);
      return this.json(ack);
    }
    return this.json({ detail: "not found" }, 404);
  };
}

export function makeItem(itemId: string, nCandidates: number, groundTruth = "right answer"): ItemPayload {
  return {
    item_id: itemId,
    record_id: itemId.replace("item-", ""),
    language: "hi",
    context: "some long context paragraph",
    question: "what is the answer?",
    ground_truth: groundTruth,
    candidates: Array.from({ length: nCandidates }, (_, i) => ({
      candidate_id: `${itemId}/c${i}`,
      answer_text: i % 3 === 0 ? groundTruth : i % 3 === 1 ? "right" : "wrong",
    })),
  };
}
