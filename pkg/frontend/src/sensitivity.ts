/**
 * Sensitivity explorer: ratio curve over one factor or heatmap over a
 * factor pair, fetched from the sensitivity endpoint and cached by the
 * client per (bundle, factors, grid).  Cell hovers expose the exact
 * payload ratio.
 */

import type { ApiClient } from "./client";
import { el, numberCell, clear } from "./dom";
import { ratio, shift } from "./format";
import type { SensitivityResponse } from "./types";

function colour(value: number, lo: number, hi: number): string {
  const t = hi > lo ? (value - lo) / (hi - lo) : 0.5;
  const hue = 10 + 110 * Math.min(1, Math.max(0, t)); // red (low) to green (high)
  return `hsl(${hue.toFixed(0)}, 70%, 45%)`;
}

export class SensitivityExplorer {
  lastResponse: SensitivityResponse | null = null;
  private inflight: AbortController | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly container: HTMLElement,
  ) {}

  async show(factors: string[], grid: number): Promise<void> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const payload = await this.client.sensitivity(factors, grid, controller.signal);
      this.lastResponse = payload;
      this.render(payload);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      this.container.classList.add("stale");
      throw err;
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  private render(payload: SensitivityResponse): void {
    clear(this.container);
    this.container.classList.remove("stale");
    this.container.dataset.bundleVersion = payload.bundle_version;
    if (payload.factors.length === 1) {
      this.renderCurve(payload);
    } else {
      this.renderHeatmap(payload);
    }
  }

  private renderCurve(payload: SensitivityResponse): void {
    const axis = payload.axes[0] ?? [];
    const values = payload.sr as number[];
    const list = el("div", { class: "sensitivity-curve", "data-factor": payload.factors[0] ?? "" });
    values.forEach((value, i) => {
      const point = el("div", {
        class: "curve-point",
        title: `${payload.factors[0]} ${shift(axis[i] ?? 0)}: ${String(value)}`,
      }, [
        numberCell(axis[i] ?? 0, shift(axis[i] ?? 0), { class: "axis" }),
        numberCell(value, ratio(value), { class: "sr" }),
      ]);
      list.append(point);
    });
    this.container.append(list);
  }

  private renderHeatmap(payload: SensitivityResponse): void {
    const [ax1 = [], ax2 = []] = payload.axes;
    const grid = payload.sr as number[][];
    let lo = Number.POSITIVE_INFINITY;
    let hi = Number.NEGATIVE_INFINITY;
    for (const row of grid) {
      for (const v of row) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
    const table = el("table", {
      class: "sensitivity-heatmap",
      "data-f1": payload.factors[0] ?? "",
      "data-f2": payload.factors[1] ?? "",
    });
    const header = el("tr", {}, [el("th", {}, [""])]);
    for (const v of ax2) header.append(el("th", {}, [shift(v)]));
    table.append(header);
    grid.forEach((row, i) => {
      const tr = el("tr", {}, [el("th", {}, [shift(ax1[i] ?? 0)])]);
      row.forEach((value, k) => {
        const cell = el("td", {
          class: "heat-cell",
          style: `background: ${colour(value, lo, hi)}`,
          title: String(value), // hover shows the exact payload ratio
          "data-value": String(value),
          "data-i": String(i),
          "data-k": String(k),
        });
        tr.append(cell);
      });
      table.append(tr);
    });
    this.container.append(table);
  }
}
