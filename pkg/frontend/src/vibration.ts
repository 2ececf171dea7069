/**
 * Stimulus cue delivery.
 *
 * Browsers can only fire a fixed-strength vibration pattern; there is no
 * amplitude control, so the cue is a demonstration channel: the stimulus
 * duration is honored, the intensity is shown on screen but not physically
 * rendered.  Platforms without the vibration API fall back to a visual
 * flash.
 */

export type CueChannel = "vibration" | "visual";

export interface VibrationCapable {
  vibrate?: (pattern: number | number[]) => boolean;
}

export function vibrationSupported(nav: VibrationCapable): boolean {
  return typeof nav.vibrate === "function";
}

/**
 * Deliver the cue for a stimulus of ``durationSeconds``; returns the channel
 * actually used so the session can note a fallback.
 */
export function deliverCue(
  durationSeconds: number,
  nav: VibrationCapable,
  flash: (durationMs: number) => void,
): CueChannel {
  const durationMs = Math.max(1, Math.round(durationSeconds * 1000));
  if (vibrationSupported(nav)) {
    try {
      if (nav.vibrate!(durationMs)) {
        return "vibration";
      }
    } catch {
      // fall through to the visual channel
    }
  }
  flash(durationMs);
  return "visual";
}
