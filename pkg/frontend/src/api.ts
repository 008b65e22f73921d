/** Thin typed client over the annotation HTTP API. */

import type { NextResponse, SessionResponse, SubmitAck, Verdict } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly candidates: string[] = [],
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail: unknown = null;
  try {
    detail = (await response.json()).detail;
  } catch {
    /* non-JSON body */
  }
  if (detail && typeof detail === "object" && "error" in detail) {
    const d = detail as { error: string; candidates?: string[] };
    return new ApiError(d.error, response.status, d.candidates ?? []);
  }
  return new ApiError(String(detail ?? response.statusText), response.status);
}

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, 0);
    }
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  instructions(): Promise<{ text: string }> {
    return this.request("/annotation/instructions");
  }

  openSession(language: string, annotatorId = "anon"): Promise<SessionResponse> {
    return this.request("/annotation/session", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ language, annotator_id: annotatorId }),
    });
  }

  next(sessionId: string): Promise<NextResponse> {
    return this.request(`/annotation/next?session=${encodeURIComponent(sessionId)}`);
  }

  submit(sessionId: string, itemId: string, verdicts: Record<string, Verdict>): Promise<SubmitAck> {
    return this.request("/annotation/submit", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ session: sessionId, item_id: itemId, verdicts }),
    });
  }
}
