/** Thin fetch client for the /v1 API. No retrieval logic lives here. */

import type { ApiErrorBody, QueryKind, QueryResponse, SessionInfo } from "./types.js";

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let body: ApiErrorBody;
  try {
    body = (await resp.json()) as ApiErrorBody;
  } catch {
    body = { code: `HTTP${resp.status}`, message: resp.statusText || "request failed" };
  }
  return new ApiError(resp.status, body);
}

export class Client {
  constructor(readonly baseUrl: string = "") {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  createSession(kind: QueryKind): Promise<SessionInfo> {
    return this.post<SessionInfo>("/v1/sessions", { kind });
  }

  query(
    sessionId: string,
    text: string,
    referenceB64?: string,
    topK?: number,
  ): Promise<QueryResponse> {
    const body: Record<string, unknown> = { text };
    if (referenceB64) body.reference_image = { b64: referenceB64 };
    if (topK) body.top_k = topK;
    return this.post<QueryResponse>(`/v1/sessions/${sessionId}/query`, body);
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/v1/images/${encodeURIComponent(imageId)}`;
  }
}
