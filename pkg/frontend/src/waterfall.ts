/**
 * Attribution waterfall: one bar per factor in server order plus the
 * headline total.  Bar heights are layout; every label is the server
 * delta verbatim, so the bars sum to the headline exactly when the server
 * says they do.
 */

import { el, numberCell, clear } from "./dom";
import { delta, ratio } from "./format";
import type { AttributionResponse } from "./types";

export function renderWaterfall(container: HTMLElement, payload: AttributionResponse): void {
  clear(container);
  container.dataset.bundleVersion = payload.bundle_version;
  let maxAbs = Math.abs(payload.total_delta);
  for (const d of payload.deltas) maxAbs = Math.max(maxAbs, Math.abs(d));
  const scale = maxAbs > 0 ? 60 / maxAbs : 0;

  const bars = el("div", { class: "waterfall" });
  payload.order.forEach((factor, i) => {
    const value = payload.deltas[i] ?? 0;
    bars.append(el("div", { class: "bar-group", "data-factor": factor }, [
      el("div", {
        class: value >= 0 ? "bar positive" : "bar negative",
        style: `height: ${Math.max(1, Math.abs(value) * scale).toFixed(1)}px`,
      }),
      numberCell(value, delta(value), { class: "bar-delta" }),
      el("div", { class: "bar-label" }, [factor]),
    ]));
  });
  bars.append(el("div", { class: "bar-group total", "data-factor": "total" }, [
    el("div", {
      class: payload.total_delta >= 0 ? "bar positive" : "bar negative",
      style: `height: ${Math.max(1, Math.abs(payload.total_delta) * scale).toFixed(1)}px`,
    }),
    numberCell(payload.total_delta, delta(payload.total_delta), { class: "bar-delta total-delta" }),
    el("div", { class: "bar-label" }, ["total"]),
  ]));
  container.append(
    el("div", { class: "waterfall-base" }, [
      "base ratio ",
      numberCell(payload.base_sr, ratio(payload.base_sr), { class: "base-sr" }),
    ]),
    bars,
  );
}
