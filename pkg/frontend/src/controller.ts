/**
 * Session view-model: consumes the server event stream and exposes exactly
 * what the page renders.  All numbers come from the server; the only state
 * computed here is bookkeeping (last seen seq for reconnects, connection
 * status).  No staircase math lives on the client.
 */

import type { SessionApi } from "./api.js";
import type {
  ResponseOutcome,
  ResultDoc,
  SessionEvent,
  StaircaseConfig,
  StimulusPayload,
  TrialDoc,
} from "./types.js";

export type SessionStatus =
  | "idle"
  | "connecting"
  | "running"
  | "completed"
  | "aborted"
  | "error";

export interface TracePoint {
  trial: number;
  intensity: number;
  outcome: TrialDoc["outcome"];
  isReversal: boolean;
}

export interface UiSessionView {
  sessionId: string | null;
  status: SessionStatus;
  connected: boolean;
  trials: TrialDoc[];
  trace: TracePoint[];
  falsePositives: number;
  lastOutcome: ResponseOutcome | null;
  result: ResultDoc | null;
  cueChannel: "vibration" | "visual" | null;
  error: string | null;
}

export interface ControllerHooks {
  /** Fired for every stimulus onset so the page can deliver the cue. */
  onStimulus?: (stimulus: StimulusPayload) => void;
  /** Fired after any view change. */
  onChange?: (view: UiSessionView) => void;
}

const RECONNECT_DELAY_MS = 500;

export class SessionController {
  readonly view: UiSessionView = {
    sessionId: null,
    status: "idle",
    connected: false,
    trials: [],
    trace: [],
    falsePositives: 0,
    lastOutcome: null,
    result: null,
    cueChannel: null,
    error: null,
  };

  private lastSeq: number | null = null;
  private closeStream: (() => void) | null = null;
  private stopped = false;

  constructor(
    private api: SessionApi,
    private hooks: ControllerHooks = {},
  ) {}

  private changed(): void {
    this.hooks.onChange?.(this.view);
  }

  async start(config: Partial<StaircaseConfig>): Promise<void> {
    this.view.status = "connecting";
    this.changed();
    try {
      this.view.sessionId = await this.api.createSession(config);
    } catch (error) {
      this.view.status = "error";
      this.view.error = String(error);
      this.changed();
      throw error;
    }
    this.view.status = "running";
    this.view.error = null;
    this.connect();
    this.changed();
  }

  /** Subscribe (or re-subscribe after a drop) to the event stream. */
  private connect(): void {
    if (this.view.sessionId === null || this.stopped) {
      return;
    }
    this.closeStream?.();
    this.closeStream = this.api.streamEvents(
      this.view.sessionId,
      {
        onEvent: (event) => this.handleEvent(event),
        onEnd: () => {
          this.view.connected = false;
          this.changed();
        },
        onError: () => {
          this.view.connected = false;
          this.changed();
          if (!this.stopped && this.view.status === "running") {
            setTimeout(() => this.connect(), RECONNECT_DELAY_MS);
          }
        },
      },
      this.lastSeq ?? undefined,
    );
    this.view.connected = true;
  }

  private handleEvent(event: SessionEvent): void {
    this.lastSeq = event.seq;
    switch (event.kind) {
      case "stimulus_onset":
        this.hooks.onStimulus?.(event.payload as unknown as StimulusPayload);
        break;
      case "trial_resolved": {
        const trial = event.payload as unknown as TrialDoc;
        this.view.trials.push(trial);
        this.view.trace.push({
          trial: trial.trial_index,
          intensity: trial.intensity,
          outcome: trial.outcome,
          isReversal: trial.is_reversal,
        });
        if (trial.outcome === "late_response") {
          this.view.falsePositives += 1;
        }
        break;
      }
      case "response_received":
        if (event.payload["attributed"] === false) {
          this.view.falsePositives += 1;
        }
        break;
      case "session_completed":
        this.view.status = "completed";
        void this.fetchResult();
        break;
      default:
        break;
    }
    this.changed();
  }

  private async fetchResult(): Promise<void> {
    if (this.view.sessionId === null) {
      return;
    }
    try {
      const doc = await this.api.getResult(this.view.sessionId);
      this.view.result = doc.result;
      this.view.falsePositives = doc.result.false_positive_count;
    } catch (error) {
      this.view.error = String(error);
    }
    this.changed();
  }

  /** Button press: post immediately, render the server's verdict. */
  async respond(): Promise<ResponseOutcome | null> {
    if (this.view.sessionId === null || this.view.status !== "running") {
      return null;
    }
    const note = this.view.cueChannel === "visual" ? "cue=visual" : undefined;
    const outcome = await this.api.postResponse(this.view.sessionId, note);
    this.view.lastOutcome = outcome;
    this.changed();
    return outcome;
  }

  async abort(): Promise<void> {
    if (this.view.sessionId === null) {
      return;
    }
    await this.api.abortSession(this.view.sessionId);
    this.view.status = "aborted";
    this.stop();
    this.changed();
  }

  noteCueChannel(channel: "vibration" | "visual"): void {
    this.view.cueChannel = channel;
    this.changed();
  }

  /** Stop streaming (page teardown); does not touch the server session. */
  stop(): void {
    this.stopped = true;
    this.closeStream?.();
    this.closeStream = null;
    this.view.connected = false;
  }

  /** Wait until the session result is rendered (used by tests). */
  async waitForCompletion(timeoutMs = 30_000): Promise<ResultDoc> {
    const start = Date.now();
    for (;;) {
      if (this.view.result !== null) {
        return this.view.result;
      }
      if (Date.now() - start > timeoutMs) {
        throw new Error("timed out waiting for session completion");
      }
      await new Promise((resolve) => setTimeout(resolve, 10));
    }
  }
}
