/** Page wiring: config form -> live session -> result panel. */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { renderTraceSvg } from "./trace.js";
import { deliverCue } from "./vibration.js";
import { DEFAULT_CONFIG, trialsToCsv, validateConfig } from "./types.js";
import type { StaircaseConfig } from "./types.js";

const FORM_FIELDS: Array<{ key: keyof StaircaseConfig; label: string; step: string }> = [
  { key: "start_intensity", label: "start intensity", step: "0.05" },
  { key: "step_size", label: "step size", step: "0.01" },
  { key: "target_reversals", label: "reversals", step: "1" },
  { key: "response_deadline", label: "deadline (s)", step: "0.1" },
  { key: "isi_min", label: "ISI min (s)", step: "0.5" },
  { key: "isi_max", label: "ISI max (s)", step: "0.5" },
  { key: "max_trials", label: "max trials", step: "1" },
  { key: "rng_seed", label: "seed", step: "1" },
];

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function download(filename: string, text: string, type: string): void {
  const url = URL.createObjectURL(new Blob([text], { type }));
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}

export function setupPage(): void {
  const api = new ApiClient("");
  const form = element<HTMLFormElement>("config-form");
  const fieldErrors = element<HTMLDivElement>("field-errors");
  const banner = element<HTMLDivElement>("banner");
  const cueBox = element<HTMLDivElement>("cue-box");
  const intensityLabel = element<HTMLDivElement>("intensity-label");
  const toast = element<HTMLDivElement>("toast");
  const traceBox = element<HTMLDivElement>("trace-box");
  const resultPanel = element<HTMLDivElement>("result-panel");
  const respondButton = element<HTMLButtonElement>("respond");
  const abortButton = element<HTMLButtonElement>("abort");
  const startButton = element<HTMLButtonElement>("start");

  for (const field of FORM_FIELDS) {
    const row = document.createElement("label");
    row.innerHTML =
      `<span>${field.label}</span>` +
      `<input name="${field.key}" type="number" step="${field.step}" ` +
      `value="${DEFAULT_CONFIG[field.key]}">`;
    form.appendChild(row);
  }

  const flash = (durationMs: number) => {
    cueBox.classList.add("flash");
    setTimeout(() => cueBox.classList.remove("flash"), Math.max(durationMs, 120));
  };

  const controller = new SessionController(api, {
    onStimulus: (stimulus) => {
      const channel = deliverCue(stimulus.duration, navigator, flash);
      controller.noteCueChannel(channel);
      intensityLabel.textContent =
        `trial ${stimulus.trial_index}: intensity ${stimulus.intensity.toFixed(2)} ` +
        `(displayed only - demonstration mode)`;
    },
    onChange: (view) => {
      banner.textContent = view.connected
        ? `session ${view.sessionId ?? ""} - ${view.status}`
        : view.status === "running"
          ? "connection lost - reconnecting"
          : view.status;
      banner.className = view.connected || view.status !== "running" ? "" : "warn";
      respondButton.disabled = view.status !== "running";
      abortButton.disabled = view.status !== "running";
      if (view.lastOutcome) {
        toast.textContent = view.lastOutcome.outcome.replace("_", " ");
        toast.className = `toast ${view.lastOutcome.outcome}`;
      }
      traceBox.innerHTML = renderTraceSvg(
        view.trace,
        view.result?.threshold_mean ?? null,
      );
      if (view.result) {
        const r = view.result;
        const mean = r.threshold_mean === null ? "n/a" : r.threshold_mean.toFixed(3);
        const sd = r.threshold_sd === null ? "n/a" : r.threshold_sd.toFixed(3);
        const precise =
          r.threshold_sd !== null && r.threshold_sd < r.config.step_size;
        resultPanel.innerHTML =
          `<h2>result</h2>` +
          `<p class="${precise ? "precise" : ""}">threshold ${mean} &plusmn; ${sd}` +
          `${precise ? " (SD below the intensity step)" : ""}</p>` +
          `<p>reversals: ${r.reversal_indices.length}, ` +
          `false positives: ${r.false_positive_count}, ` +
          `termination: ${r.termination}</p>` +
          `<button id="dl-json">download result JSON</button> ` +
          `<button id="dl-csv">download trials CSV</button>`;
        element<HTMLButtonElement>("dl-json").onclick = () =>
          download("result.json", JSON.stringify({ result: r }, null, 2), "application/json");
        element<HTMLButtonElement>("dl-csv").onclick = () =>
          download("trials.csv", trialsToCsv(r.trials), "text/csv");
      } else if (view.status === "aborted") {
        resultPanel.innerHTML = "<h2>result</h2><p>no result (session aborted)</p>";
      }
    },
  });

  startButton.onclick = async () => {
    const config = { ...DEFAULT_CONFIG };
    for (const field of FORM_FIELDS) {
      const input = form.querySelector<HTMLInputElement>(`input[name=${field.key}]`);
      if (input && input.value !== "") {
        (config as Record<string, number>)[field.key] = Number(input.value);
      }
    }
    const errors = validateConfig(config);
    fieldErrors.innerHTML = "";
    if (errors.size > 0) {
      for (const [field, message] of errors) {
        const p = document.createElement("p");
        p.textContent = `${field}: ${message}`;
        fieldErrors.appendChild(p);
      }
      return;
    }
    startButton.disabled = true;
    try {
      await controller.start(config);
    } catch (error) {
      banner.textContent = `could not start session: ${String(error)}`;
      banner.className = "warn";
      startButton.disabled = false;
    }
  };

  respondButton.onclick = () => void controller.respond();
  abortButton.onclick = () => void controller.abort();
}

if (typeof document !== "undefined" && document.getElementById("config-form")) {
  setupPage();
}
