/**
 * Solvency-ratio time series as an inline SVG: raw series always, the
 * server-smoothed series as a second line when toggled.  The chart scales
 * are layout; the numbers surfaced (first/last/extreme labels, hover
 * titles) are payload values verbatim.
 */

import { el, numberCell, clear } from "./dom";
import { ratio } from "./format";
import type { HistoryResponse } from "./types";

const WIDTH = 640;
const HEIGHT = 180;
const PAD = 8;

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  return node;
}

function path(values: (number | null)[], lo: number, span: number): string {
  const n = values.length;
  const step = n > 1 ? (WIDTH - 2 * PAD) / (n - 1) : 0;
  const parts: string[] = [];
  values.forEach((value, i) => {
    if (value === null) return;
    const x = PAD + i * step;
    const y = HEIGHT - PAD - ((value - lo) / span) * (HEIGHT - 2 * PAD);
    parts.push(`${parts.length === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`);
  });
  return parts.join(" ");
}

export function renderTimeseries(
  container: HTMLElement,
  payload: HistoryResponse,
  options: { smoothed: boolean },
): void {
  clear(container);
  container.dataset.bundleVersion = payload.bundle_version;
  if (payload.dates.length === 0) {
    container.append(el("div", { class: "empty-state" }, ["no records in the selected range"]));
    return;
  }
  const finite = payload.sr.filter((v): v is number => v !== null);
  const smoothedSeries = options.smoothed ? payload.smoothed_sr ?? [] : [];
  const everything = finite.concat(smoothedSeries);
  // extremes are selected from the payload, not computed
  let lo = everything[0] ?? 0;
  let hi = everything[0] ?? 1;
  for (const v of everything) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const span = hi > lo ? hi - lo : 1;

  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: "sr-chart",
    role: "img",
  });
  const raw = svgEl("path", { d: path(payload.sr, lo, span), class: "series raw" });
  svg.append(raw);
  if (options.smoothed && payload.smoothed_sr) {
    svg.append(svgEl("path", {
      d: path(payload.smoothed_sr, lo, span),
      class: "series smoothed",
    }));
  }
  const last = payload.sr[payload.sr.length - 1] ?? null;
  const lastDate = payload.dates[payload.dates.length - 1] ?? "";
  container.append(
    svg,
    el("div", { class: "chart-legend" }, [
      el("span", {}, [`${payload.dates[0] ?? ""} to ${lastDate}`]),
      numberCell(lo, ratio(lo), { class: "min" }),
      numberCell(hi, ratio(hi), { class: "max" }),
      numberCell(last, ratio(last), { class: "last" }),
    ]),
  );
}
