import { describe, expect, it } from "vitest";

import type { SessionApi, StreamHandlers } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import type { ResultDoc, SessionEvent } from "../src/types.js";

function trialEvent(seq: number, index: number, intensity: number, outcome = "detected"): SessionEvent {
  return {
    session_id: "s",
    seq,
    timestamp: seq,
    kind: "trial_resolved",
    payload: {
      trial_index: index,
      intensity,
      onset_time: index * 3,
      response_latency: outcome === "missed" ? null : 0.4,
      outcome,
      intended_direction_after: outcome === "detected" ? "down" : "up",
      is_reversal: false,
    },
  };
}

const RESULT: ResultDoc = {
  config: {} as ResultDoc["config"],
  trials: [],
  reversal_indices: [2, 3],
  threshold_mean: 0.425,
  threshold_sd: 0.026,
  false_positive_count: 1,
  termination: "reversals_reached",
};

class FakeApi implements SessionApi {
  streams: Array<{ handlers: StreamHandlers; lastSeq?: number }> = [];
  responses = 0;

  async createSession(): Promise<string> {
    return "s";
  }

  async postResponse() {
    this.responses += 1;
    return { outcome: "detected" as const, trial_index: 0, latency_s: 0.4 };
  }

  async abortSession(): Promise<void> {}

  async getResult() {
    return { session_id: "s", result: RESULT };
  }

  streamEvents(_: string, handlers: StreamHandlers, lastSeq?: number): () => void {
    this.streams.push({ handlers, lastSeq });
    return () => {};
  }
}

async function tick(ms = 0): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, ms));
}

describe("SessionController", () => {
  it("mirrors trial_resolved events into the trace without any client math", async () => {
    const api = new FakeApi();
    const controller = new SessionController(api);
    await controller.start({});
    const { handlers } = api.streams[0]!;
    handlers.onEvent(trialEvent(2, 0, 0.5));
    handlers.onEvent(trialEvent(5, 1, 0.45, "missed"));
    expect(controller.view.trace).toEqual([
      { trial: 0, intensity: 0.5, outcome: "detected", isReversal: false },
      { trial: 1, intensity: 0.45, outcome: "missed", isReversal: false },
    ]);
  });

  it("fetches the result document when the session completes", async () => {
    const api = new FakeApi();
    const controller = new SessionController(api);
    await controller.start({});
    api.streams[0]!.handlers.onEvent({
      session_id: "s", seq: 9, timestamp: 40,
      kind: "session_completed", payload: { result: {} },
    });
    const result = await controller.waitForCompletion(1000);
    expect(result.threshold_mean).toBe(0.425);
    expect(controller.view.status).toBe("completed");
    expect(controller.view.falsePositives).toBe(1);
  });

  it("reconnects with the last seen seq and loses no trials", async () => {
    const api = new FakeApi();
    const controller = new SessionController(api);
    await controller.start({});
    const first = api.streams[0]!;
    first.handlers.onEvent(trialEvent(2, 0, 0.5));
    first.handlers.onEvent(trialEvent(5, 1, 0.45));
    first.handlers.onError?.(new Error("network blip"));
    await tick(600); // past the reconnect delay
    expect(api.streams.length).toBe(2);
    const second = api.streams[1]!;
    expect(second.lastSeq).toBe(5); // resume exactly after the last event
    second.handlers.onEvent(trialEvent(8, 2, 0.4, "missed"));
    expect(controller.view.trace.map((p) => p.trial)).toEqual([0, 1, 2]);
    controller.stop();
  });

  it("counts unattributed presses as false positives", async () => {
    const api = new FakeApi();
    const controller = new SessionController(api);
    await controller.start({});
    api.streams[0]!.handlers.onEvent({
      session_id: "s", seq: 3, timestamp: 1.0,
      kind: "response_received", payload: { time: 1.0, attributed: false },
    });
    expect(controller.view.falsePositives).toBe(1);
  });

  it("refuses button presses once the session is over", async () => {
    const api = new FakeApi();
    const controller = new SessionController(api);
    await controller.start({});
    api.streams[0]!.handlers.onEvent({
      session_id: "s", seq: 4, timestamp: 2,
      kind: "session_completed", payload: {},
    });
    const outcome = await controller.respond();
    expect(outcome).toBeNull();
    expect(api.responses).toBe(0);
  });

  it("surfaces server errors when starting", async () => {
    const api = new FakeApi();
    api.createSession = async () => {
      throw new Error("503 down");
    };
    const controller = new SessionController(api);
    await expect(controller.start({})).rejects.toThrow("down");
    expect(controller.view.status).toBe("error");
  });
});
