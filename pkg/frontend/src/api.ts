/** Client for the server's HTTP + SSE contract. */

import { readSse, SseEvent } from "./sse.js";
import { SessionResponseSchema, Trace, TraceSchema } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(): Promise<string> {
    const response = await fetch(this.url("/sessions"), { method: "POST" });
    if (!response.ok) throw new ApiError(`create session failed`, response.status);
    return SessionResponseSchema.parse(await response.json()).session_id;
  }

  /** Stream one turn: yields stage / final / turn_index / error events. */
  async *streamMessage(sessionId: string, utterance: string): AsyncGenerator<SseEvent> {
    const response = await fetch(this.url(`/sessions/${sessionId}/messages/stream`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ utterance }),
    });
    if (!response.ok || response.body === null) {
      throw new ApiError(`message stream failed`, response.status);
    }
    yield* readSse(response.body);
  }

  async getTrace(sessionId: string, turnIndex: number): Promise<Trace> {
    const response = await fetch(this.url(`/sessions/${sessionId}/trace/${turnIndex}`));
    if (!response.ok) throw new ApiError(`trace fetch failed`, response.status);
    return TraceSchema.parse(await response.json());
  }
}
