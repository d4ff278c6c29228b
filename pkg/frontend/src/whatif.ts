/**
 * What-if steering panel: sliders per factor, headline ratio, marginal
 * charges and the attribution waterfall.
 *
 * Behaviour contract: slider moves are debounced, a new move aborts the
 * in-flight round trip, numeric displays only ever change when a response
 * lands (no optimistic values), failures mark the last-good numbers stale
 * and offer a retry, and the out-of-space badge mirrors the server flag.
 */

import type { ApiClient } from "./client";
import { el, numberCell, clear } from "./dom";
import { amount, ratio, shift } from "./format";
import type { SliderBounds } from "./state";
import { renderWaterfall } from "./waterfall";
import type { AttributionResponse, WhatifResponse } from "./types";

export interface WhatifOptions {
  debounceMs?: number;
  now?: () => number;
}

export class WhatifPanel {
  readonly sliders: Record<string, number> = {};
  /** milliseconds between response receipt and the finished render */
  lastRenderLatencyMs: number | null = null;
  lastResponse: WhatifResponse | null = null;
  lastAttribution: AttributionResponse | null = null;

  private readonly debounceMs: number;
  private readonly now: () => number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private readonly results: HTMLElement;
  private readonly controls: HTMLElement;
  private pending: Promise<void> = Promise.resolve();

  constructor(
    private readonly client: ApiClient,
    private readonly container: HTMLElement,
    readonly factorIds: string[],
    readonly bounds: Record<string, SliderBounds>,
    options: WhatifOptions = {},
  ) {
    this.debounceMs = options.debounceMs ?? 150;
    this.now = options.now ?? (() => performance.now());
    for (const id of factorIds) this.sliders[id] = 0;
    this.controls = el("div", { class: "whatif-controls" });
    this.results = el("div", { class: "whatif-results" });
    this.buildControls();
    container.append(this.controls, this.results);
  }

  private buildControls(): void {
    for (const id of this.factorIds) {
      const b = this.bounds[id] ?? { lo: -0.5, hi: 0.5 };
      const input = el("input", {
        type: "range",
        // soft bounds: allow steering past the probable interval, the
        // server flag decides whether to warn
        min: String(b.lo * 2),
        max: String(b.hi * 2),
        step: String((b.hi - b.lo) / 100 || 0.01),
        value: "0",
        "data-factor": id,
      });
      input.addEventListener("input", () => {
        this.setSlider(id, Number(input.value));
      });
      this.controls.append(el("label", { class: "slider", "data-factor": id }, [
        el("span", { class: "slider-label" }, [id]),
        input,
        numberCell(this.sliders[id] ?? 0, shift(this.sliders[id] ?? 0), {
          class: "slider-value",
          "data-factor": id,
        }),
      ]));
    }
  }

  setSlider(id: string, value: number): void {
    if (!(id in this.sliders)) throw new Error(`unknown factor ${id}`);
    this.sliders[id] = value;
    const label = this.controls.querySelector<HTMLElement>(
      `.slider-value[data-factor="${id}"]`,
    );
    if (label) {
      label.dataset.value = String(value);
      label.textContent = shift(value);
    }
    this.schedule();
  }

  /** Pending round trip, for tests and app wiring. */
  settled(): Promise<void> {
    return this.pending;
  }

  private schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.pending = this.fire();
    }, this.debounceMs);
  }

  /** Run the round trip immediately (used by the retry affordance). */
  refresh(): Promise<void> {
    this.pending = this.fire();
    return this.pending;
  }

  private async fire(): Promise<void> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.container.classList.add("loading");
    try {
      const factors = { ...this.sliders };
      const [whatif, attribution] = await Promise.all([
        this.client.whatif(factors, controller.signal),
        this.client.attribution(factors, controller.signal),
      ]);
      const received = this.now();
      this.render(whatif, attribution);
      this.lastRenderLatencyMs = this.now() - received;
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      this.markStale(String(err));
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
        this.container.classList.remove("loading");
      }
    }
  }

  private render(whatif: WhatifResponse, attribution: AttributionResponse): void {
    this.lastResponse = whatif;
    this.lastAttribution = attribution;
    this.container.classList.remove("stale");
    clear(this.results);
    this.results.dataset.bundleVersion = whatif.bundle_version;

    const snap = whatif.snapshot;
    const headline = el("div", { class: "headline" }, [
      "solvency ratio ",
      numberCell(snap.sr, ratio(snap.sr), { class: "headline-sr" }),
    ]);
    if (whatif.out_of_space) {
      headline.append(el("span", { class: "badge out-of-space-badge" }, [
        "outside probable range",
      ]));
    }
    const detail = el("table", { class: "snapshot" });
    const rows: [string, number | null, string][] = [
      ["central NAV", snap.nav_central, amount(snap.nav_central)],
      ["own funds", snap.own_funds, amount(snap.own_funds)],
      ["capital requirement", snap.scr, amount(snap.scr)],
      ["basic requirement", snap.bscr, amount(snap.bscr)],
      ["in-force value", snap.vif, amount(snap.vif)],
      ["deferred tax", snap.dtl, amount(snap.dtl)],
    ];
    for (const [label, value, formatted] of rows) {
      detail.append(el("tr", {}, [
        el("td", {}, [label]),
        el("td", {}, [numberCell(value, formatted, { class: "snap" })]),
      ]));
    }
    const marginals = el("table", { class: "marginals" });
    for (const [name, value] of Object.entries(snap.marginals?.monitored ?? {})) {
      marginals.append(el("tr", { "data-submodule": name }, [
        el("td", {}, [name]),
        el("td", {}, [numberCell(value, amount(value), { class: "marginal" })]),
      ]));
    }
    const waterfall = el("div", { class: "waterfall-panel" });
    renderWaterfall(waterfall, attribution);
    this.results.append(headline, detail, marginals, waterfall);
  }

  private markStale(message: string): void {
    this.container.classList.add("stale");
    let banner = this.container.querySelector<HTMLElement>(".stale-banner");
    if (!banner) {
      banner = el("div", { class: "stale-banner" });
      const retry = el("button", { class: "retry" }, ["retry"]);
      retry.addEventListener("click", () => {
        void this.refresh();
      });
      banner.append(el("span", { class: "stale-message" }), retry);
      this.container.prepend(banner);
    }
    const text = banner.querySelector<HTMLElement>(".stale-message");
    if (text) text.textContent = `showing last good values - ${message}`;
  }
}
