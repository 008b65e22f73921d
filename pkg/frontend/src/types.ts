/** Wire types of the annotation HTTP API (the only backend surface we touch). */

export type Verdict = "Yes" | "Partial" | "No";

export const VERDICTS: readonly Verdict[] = ["Yes", "Partial", "No"];

/** One blinded candidate answer; the server never sends arm identity. */
export interface CandidatePayload {
  candidate_id: string;
  answer_text: string;
}

/** Wire form of one annotation item. */
export interface ItemPayload {
  item_id: string;
  record_id: string;
  language: string;
  context: string;
  question: string;
  ground_truth: string;
  candidates: CandidatePayload[];
}

export interface NextResponse {
  done: boolean;
  item?: ItemPayload;
}

export interface SessionResponse {
  session_id: string;
  language: string;
}

export interface SubmitAck {
  item_id: string;
  accepted: number;
  rewards: Record<string, number>;
  rescored_f1: Record<string, number>;
}

/** Local view model: the server item plus this annotator's draft verdicts. */
export interface UIItemView {
  item: ItemPayload;
  drafts: Map<string, Verdict>;
}
