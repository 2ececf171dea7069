/**
 * Typed client for the session service.
 *
 * The event stream uses fetch streaming rather than EventSource so that
 * reconnects can send the `Last-Event-Seq` header the server defines (the
 * native EventSource API cannot set headers), and so the same code runs in
 * browsers and in node-based tests.
 */

import type {
  ResponseOutcome,
  ResultDoc,
  SessionEvent,
  StaircaseConfig,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`HTTP ${status}: ${JSON.stringify(detail)}`);
  }
}

async function requireOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail: unknown = null;
    try {
      detail = await response.json();
    } catch {
      detail = await response.text().catch(() => "");
    }
    throw new ApiError(response.status, detail);
  }
  return response;
}

export interface SessionSummary {
  session_id: string;
  state: "running" | "completed" | "aborted";
  created_at: number;
  config: StaircaseConfig;
  trial_count: number;
  reversal_count: number;
  false_positive_count: number;
  pending_stimulus: {
    trial_index: number;
    intensity: number;
    duration: number;
    scheduled_onset: number;
    onset_emitted: boolean;
  } | null;
}

export interface StreamHandlers {
  onEvent: (event: SessionEvent) => void;
  onEnd?: () => void;
  onError?: (error: unknown) => void;
}

/** The slice of the service the session controller depends on. */
export interface SessionApi {
  createSession(config: Partial<StaircaseConfig>): Promise<string>;
  postResponse(sessionId: string, note?: string): Promise<ResponseOutcome>;
  abortSession(sessionId: string): Promise<void>;
  getResult(sessionId: string): Promise<{ session_id: string; result: ResultDoc }>;
  streamEvents(
    sessionId: string,
    handlers: StreamHandlers,
    lastSeq?: number,
  ): () => void;
}

export class ApiClient implements SessionApi {
  constructor(
    public baseUrl: string = "",
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(config: Partial<StaircaseConfig>): Promise<string> {
    const response = await requireOk(
      await this.fetchImpl(this.url("/v1/sessions"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(config),
      }),
    );
    const body = (await response.json()) as { session_id: string };
    return body.session_id;
  }

  async getSession(sessionId: string): Promise<SessionSummary> {
    const response = await requireOk(
      await this.fetchImpl(this.url(`/v1/sessions/${sessionId}`)),
    );
    return (await response.json()) as SessionSummary;
  }

  async postResponse(sessionId: string, note?: string): Promise<ResponseOutcome> {
    const response = await requireOk(
      await this.fetchImpl(this.url(`/v1/sessions/${sessionId}/response`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(note ? { client_note: note } : {}),
      }),
    );
    return (await response.json()) as ResponseOutcome;
  }

  async abortSession(sessionId: string): Promise<void> {
    await requireOk(
      await this.fetchImpl(this.url(`/v1/sessions/${sessionId}/abort`), {
        method: "POST",
      }),
    );
  }

  async getResult(sessionId: string): Promise<{ session_id: string; result: ResultDoc }> {
    const response = await requireOk(
      await this.fetchImpl(this.url(`/v1/sessions/${sessionId}/result`)),
    );
    return (await response.json()) as { session_id: string; result: ResultDoc };
  }

  /**
   * Open the server-sent event stream.  ``lastSeq`` resumes after a known
   * sequence number (full gap recovery); omitted, the server tails live
   * events.  Returns a function that aborts the stream.
   */
  streamEvents(
    sessionId: string,
    handlers: StreamHandlers,
    lastSeq?: number,
  ): () => void {
    const controller = new AbortController();
    const headers: Record<string, string> = { accept: "text/event-stream" };
    if (lastSeq !== undefined) {
      headers["Last-Event-Seq"] = String(lastSeq);
    }
    void (async () => {
      try {
        const response = await requireOk(
          await this.fetchImpl(this.url(`/v1/sessions/${sessionId}/events`), {
            headers,
            signal: controller.signal,
          }),
        );
        const body = response.body;
        if (!body) {
          throw new Error("response has no body stream");
        }
        const reader = body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) {
            break;
          }
          buffer += decoder.decode(value, { stream: true });
          let sep: number;
          while ((sep = buffer.indexOf("\n\n")) >= 0) {
            const frame = buffer.slice(0, sep);
            buffer = buffer.slice(sep + 2);
            const data = parseSseFrame(frame);
            if (data !== null) {
              handlers.onEvent(JSON.parse(data) as SessionEvent);
            }
          }
        }
        handlers.onEnd?.();
      } catch (error) {
        if (!controller.signal.aborted) {
          handlers.onError?.(error);
        }
      }
    })();
    return () => controller.abort();
  }
}

/** Extract the data payload of one SSE frame (joining multi-line data). */
export function parseSseFrame(frame: string): string | null {
  const dataLines: string[] = [];
  for (const line of frame.split("\n")) {
    if (line.startsWith("data:")) {
      dataLines.push(line.slice(5).trimStart());
    }
  }
  return dataLines.length ? dataLines.join("\n") : null;
}
