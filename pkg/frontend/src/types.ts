/** Shared wire types mirroring the session service documents. */

export interface StaircaseConfig {
  start_intensity: number;
  step_size: number;
  target_reversals: number;
  intensity_min: number;
  intensity_max: number;
  stimulus_duration: number;
  stimulus_sharpness: number;
  response_deadline: number;
  isi_min: number;
  isi_max: number;
  max_trials: number;
  rng_seed: number;
}

export const DEFAULT_CONFIG: StaircaseConfig = {
  start_intensity: 0.5,
  step_size: 0.05,
  target_reversals: 8,
  intensity_min: 0.0,
  intensity_max: 1.0,
  stimulus_duration: 0.1,
  stimulus_sharpness: 1.0,
  response_deadline: 1.5,
  isi_min: 2.0,
  isi_max: 4.0,
  max_trials: 100,
  rng_seed: 0,
};

export type EventKind =
  | "session_created"
  | "stimulus_scheduled"
  | "stimulus_onset"
  | "response_received"
  | "trial_resolved"
  | "session_completed";

export interface SessionEvent {
  session_id: string;
  seq: number;
  timestamp: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface StimulusPayload {
  trial_index: number;
  intensity: number;
  duration: number;
  sharpness: number;
  scheduled_onset: number;
}

export interface TrialDoc {
  trial_index: number;
  intensity: number;
  onset_time: number;
  response_latency: number | null;
  outcome: "detected" | "missed" | "late_response";
  intended_direction_after: "up" | "down";
  is_reversal: boolean;
}

export interface ResultDoc {
  config: StaircaseConfig;
  trials: TrialDoc[];
  reversal_indices: number[];
  threshold_mean: number | null;
  threshold_sd: number | null;
  false_positive_count: number;
  termination: "reversals_reached" | "trial_cap_hit";
}

export interface ResponseOutcome {
  outcome: "detected" | "late_response" | "false_positive";
  trial_index: number | null;
  latency_s: number | null;
}

/**
 * Client-side mirror of the server's config invariants so a form can flag
 * bad values before the request; the server remains authoritative (422).
 * Returns one message per offending field, keyed by field name.
 */
export function validateConfig(config: StaircaseConfig): Map<string, string> {
  const errors = new Map<string, string>();
  if (!(0 <= config.intensity_min && config.intensity_min < config.intensity_max && config.intensity_max <= 1)) {
    errors.set("intensity_min", "need 0 <= min < max <= 1");
  }
  if (!(config.intensity_min <= config.start_intensity && config.start_intensity <= config.intensity_max)) {
    errors.set("start_intensity", "must lie within [intensity_min, intensity_max]");
  }
  if (!(0 < config.step_size && config.step_size <= config.intensity_max - config.intensity_min)) {
    errors.set("step_size", "need 0 < step <= intensity_max - intensity_min");
  }
  if (!(0 < config.isi_min && config.isi_min <= config.isi_max)) {
    errors.set("isi_min", "need 0 < isi_min <= isi_max");
  }
  if (!(config.response_deadline > 0)) {
    errors.set("response_deadline", "must be > 0");
  }
  if (!(config.target_reversals >= 2)) {
    errors.set("target_reversals", "must be >= 2");
  }
  if (!(config.max_trials >= config.target_reversals)) {
    errors.set("max_trials", "must be >= target_reversals");
  }
  if (!Number.isInteger(config.rng_seed)) {
    errors.set("rng_seed", "must be an integer");
  }
  return errors;
}

/** Trials CSV matching the server export schema (download convenience). */
export function trialsToCsv(trials: TrialDoc[]): string {
  const lines = ["trial,intensity,onset_s,latency_s,outcome,is_reversal"];
  for (const t of trials) {
    const latency = t.response_latency === null ? "" : String(t.response_latency);
    lines.push(
      `${t.trial_index},${t.intensity},${t.onset_time},${latency},${t.outcome},${t.is_reversal}`,
    );
  }
  return lines.join("\n") + "\n";
}
