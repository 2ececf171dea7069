/** SVG staircase trace built from server trial events (pure string output). */

import type { TracePoint } from "./controller.js";

export interface TraceGeometry {
  width: number;
  height: number;
  padding: number;
}

const DEFAULT_GEOMETRY: TraceGeometry = { width: 640, height: 240, padding: 24 };

export function renderTraceSvg(
  points: TracePoint[],
  thresholdMean: number | null = null,
  geometry: TraceGeometry = DEFAULT_GEOMETRY,
): string {
  const { width, height, padding } = geometry;
  const maxTrial = Math.max(9, points.length - 1);
  const x = (trial: number) =>
    padding + (trial / maxTrial) * (width - 2 * padding);
  const y = (intensity: number) =>
    height - padding - intensity * (height - 2 * padding);

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `class="trace" role="img" aria-label="staircase trace">`,
  ];
  for (const tick of [0, 0.25, 0.5, 0.75, 1]) {
    parts.push(
      `<line x1="${padding}" y1="${y(tick)}" x2="${width - padding}" y2="${y(tick)}" class="grid"/>`,
      `<text x="2" y="${y(tick) + 4}" class="tick">${tick.toFixed(2)}</text>`,
    );
  }
  if (points.length > 1) {
    const path = points
      .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.trial).toFixed(1)},${y(p.intensity).toFixed(1)}`)
      .join(" ");
    parts.push(`<path d="${path}" class="steps"/>`);
  }
  for (const p of points) {
    const cls = p.outcome === "detected" ? "hit" : "miss";
    const marker = p.isReversal ? ' stroke="black" stroke-width="2"' : "";
    parts.push(
      `<circle cx="${x(p.trial).toFixed(1)}" cy="${y(p.intensity).toFixed(1)}" r="4" class="${cls}"${marker}/>`,
    );
  }
  if (thresholdMean !== null) {
    parts.push(
      `<line x1="${padding}" y1="${y(thresholdMean)}" x2="${width - padding}" ` +
        `y2="${y(thresholdMean)}" class="threshold"/>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
