/** Chat state machine, kept free of DOM so component tests can drive it
 * against a stub server. The session id is the only client state and lives
 * in memory. One request per session is active at a time: the input is
 * disabled while a turn is in flight. */

import { ApiClient } from "./api.js";
import {
  renderBubblePair,
  renderErrorBanner,
  renderProgress,
  renderTracePanels,
  renderTraceUnavailable,
} from "./render.js";
import { Trace, ViewTurn } from "./types.js";

export interface ChatView {
  messagesHtml: string;
  progressHtml: string;
  errorHtml: string;
  inputDisabled: boolean;
}

export class ChatController {
  private sessionId: string | null = null;
  private turns: ViewTurn[] = [];
  private stagesDone: string[] = [];
  private inFlight = false;
  private error: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (view: ChatView) => void = () => {}
  ) {}

  view(): ChatView {
    return {
      messagesHtml: this.turns.map(renderBubblePair).join(""),
      progressHtml: renderProgress(this.stagesDone, this.inFlight),
      errorHtml: this.error === null ? "" : renderErrorBanner(this.error),
      inputDisabled: this.inFlight,
    };
  }

  private emit(): void {
    this.onChange(this.view());
  }

  get busy(): boolean {
    return this.inFlight;
  }

  getTurn(index: number): ViewTurn | undefined {
    return this.turns.find((t) => t.turnIndex === index);
  }

  async send(utterance: string): Promise<void> {
    const text = utterance.trim();
    if (!text || this.inFlight) return;
    this.inFlight = true;
    this.error = null;
    this.stagesDone = [];
    this.emit();
    try {
      if (this.sessionId === null) {
        this.sessionId = await this.api.createSession();
      }
      let final: string | null = null;
      let turnIndex: number | null = null;
      for await (const event of this.api.streamMessage(this.sessionId, text)) {
        if (event.event === "stage") {
          this.stagesDone = [...this.stagesDone, event.data];
          this.emit();
        } else if (event.event === "final") {
          final = event.data;
        } else if (event.event === "turn_index") {
          turnIndex = Number(event.data);
        } else if (event.event === "error") {
          throw new Error(describeServerError(event.data));
        }
      }
      if (final === null) throw new Error("stream ended without a final response");
      const turn: ViewTurn = { user: text, agent: final, turnIndex, trace: null };
      this.turns = [...this.turns, turn];
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
    } finally {
      this.inFlight = false;
      this.stagesDone = [];
      this.emit();
    }
  }

  /** Fetch (and cache) the trace for a finished turn; returns its HTML. */
  async traceHtml(turnIndex: number): Promise<string> {
    const turn = this.getTurn(turnIndex);
    if (!turn || this.sessionId === null) return renderTraceUnavailable();
    if (turn.trace === null) {
      try {
        const trace: Trace = await this.api.getTrace(this.sessionId, turnIndex);
        turn.trace = trace;
      } catch {
        return renderTraceUnavailable();
      }
    }
    return renderTracePanels(turn.trace);
  }
}

function describeServerError(payload: string): string {
  try {
    const parsed = JSON.parse(payload) as { stage?: string | null; message?: string };
    if (parsed.message) {
      return parsed.stage ? `turn failed at ${parsed.stage}: ${parsed.message}` : parsed.message;
    }
  } catch {
    // payload was not JSON; fall through to the raw text
  }
  return payload || "the server reported an error";
}
