/**
 * Per-factor monitoring gauges: current transition level against the
 * probable-interval bounds, out-of-space factors highlighted.  All three
 * numbers per gauge come straight from the diagram payload.
 */

import { el, numberCell, clear } from "./dom";
import { shift } from "./format";
import type { DiagramResponse } from "./types";

export function renderDiagram(container: HTMLElement, payload: DiagramResponse): void {
  clear(container);
  container.dataset.bundleVersion = payload.bundle_version;
  container.dataset.asOf = payload.as_of;
  const list = el("div", { class: "gauges" });
  for (const factor of payload.factors) {
    const width = factor.hi - factor.lo;
    // marker position is pure layout; clamped so out-of-space markers pin
    // to the edge while the highlight carries the actual signal
    const frac = width > 0 ? (factor.current - factor.lo) / width : 0.5;
    const pct = Math.min(100, Math.max(0, 100 * frac));
    const gauge = el("div", {
      class: factor.out_of_space ? "gauge out-of-space" : "gauge",
      "data-factor": factor.id,
    }, [
      el("div", { class: "gauge-label" }, [factor.id]),
      el("div", { class: "gauge-track" }, [
        el("div", { class: "gauge-marker", style: `left: ${pct}%` }),
      ]),
      el("div", { class: "gauge-values" }, [
        numberCell(factor.lo, shift(factor.lo), { class: "lo" }),
        numberCell(factor.current, shift(factor.current), { class: "current" }),
        numberCell(factor.hi, shift(factor.hi), { class: "hi" }),
      ]),
    ]);
    if (factor.out_of_space) {
      gauge.append(el("span", { class: "badge out-of-space-badge" }, ["outside probable range"]));
    }
    list.append(gauge);
  }
  container.append(list);
}
