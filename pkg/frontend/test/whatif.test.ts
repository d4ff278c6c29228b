/**
 * What-if panel contract: payload-only numbers, waterfall/headline
 * consistency, server-driven badge, debounce + cancellation, stale + retry,
 * and the render-latency budget after response receipt.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/client";
import { WhatifPanel } from "../src/whatif";
import {
  MockApi,
  attributionPayload,
  flushTimers,
  snapshot,
  whatifPayload,
} from "./mock_api";

const FACTORS = ["stock", "rates", "spread_corp", "spread_sov"];
const BOUNDS = {
  stock: { lo: -0.113, hi: 0.157 },
  rates: { lo: -0.0061, hi: 0.0044 },
  spread_corp: { lo: -0.0018, hi: 0.0017 },
  spread_sov: { lo: -0.002, hi: 0.002 },
};

function setup(api: MockApi) {
  document.body.innerHTML = "<div id='w'></div>";
  const container = document.getElementById("w") as HTMLElement;
  const client = new ApiClient("http://mock.test", api.fetch);
  const panel = new WhatifPanel(client, container, FACTORS, BOUNDS, { debounceMs: 0 });
  return { container, panel };
}

describe("what-if panel", () => {
  let api: MockApi;

  beforeEach(() => {
    api = new MockApi();
  });

  it("sliders at zero show the calibration-date ratio from the payload", async () => {
    const { container, panel } = setup(api);
    await panel.refresh();
    const headline = container.querySelector<HTMLElement>(".headline-sr")!;
    expect(headline.dataset.value).toBe(String(snapshot().sr));
    expect(container.querySelector(".out-of-space-badge")).toBeNull();
  });

  it("every displayed number equals its payload source", async () => {
    const snap = snapshot({ sr: 2.91, nav_central: 4100.5, scr: 1201.25, own_funds: 3700.1 });
    api.route("POST /v1/whatif", () => ({ payload: whatifPayload({ snapshot: snap }) }));
    const attribution = attributionPayload({
      deltas: [-0.21, -0.14, 0.0, -0.01],
      step_srs: [3.06, 2.92, 2.92, 2.91],
      total_delta: -0.36,
    });
    api.route("POST /v1/attribution", () => ({ payload: attribution }));
    const { container, panel } = setup(api);
    await panel.refresh();

    expect(container.querySelector<HTMLElement>(".headline-sr")!.dataset.value).toBe("2.91");
    const snapValues = [...container.querySelectorAll<HTMLElement>(".snapshot .snap")].map(
      (n) => n.dataset.value,
    );
    expect(snapValues).toEqual([
      String(snap.nav_central), String(snap.own_funds), String(snap.scr),
      String(snap.bscr), String(snap.vif), String(snap.dtl),
    ]);
    const marginals = [...container.querySelectorAll<HTMLElement>(".marginal")].map(
      (n) => n.dataset.value,
    );
    expect(marginals).toEqual(
      Object.values(snap.marginals!.monitored).map((v) => String(v)),
    );
    const barDeltas = [...container.querySelectorAll<HTMLElement>(
      ".bar-group:not(.total) .bar-delta",
    )].map((n) => Number(n.dataset.value));
    expect(barDeltas).toEqual(attribution.deltas);
  });

  it("waterfall bars sum to the headline delta delivered by the server", async () => {
    const attribution = attributionPayload({
      deltas: [-0.2111, 0.0423, -0.0067, 0.0001],
      total_delta: -0.2111 + 0.0423 - 0.0067 + 0.0001,
    });
    api.route("POST /v1/attribution", () => ({ payload: attribution }));
    const { container, panel } = setup(api);
    await panel.refresh();
    const bars = [...container.querySelectorAll<HTMLElement>(
      ".bar-group:not(.total) .bar-delta",
    )].map((n) => Number(n.dataset.value));
    const total = Number(
      container.querySelector<HTMLElement>(".total-delta")!.dataset.value,
    );
    expect(bars.reduce((a, b) => a + b, 0)).toBeCloseTo(total, 12);
    expect(total).toBe(attribution.total_delta);
  });

  it("one slider moved produces exactly one nonzero bar", async () => {
    api.route("POST /v1/attribution", (_url, body) => {
      const factors = (body as { factors: Record<string, number> }).factors;
      const deltas = FACTORS.map((id) => (factors[id] ? -0.18 : 0));
      return {
        payload: attributionPayload({
          deltas,
          total_delta: deltas.reduce((a, b) => a + b, 0),
        }),
      };
    });
    const { container, panel } = setup(api);
    panel.setSlider("stock", -0.1);
    await flushTimers();
    await panel.settled();
    const bars = [...container.querySelectorAll<HTMLElement>(
      ".bar-group:not(.total) .bar-delta",
    )].map((n) => Number(n.dataset.value));
    expect(bars.filter((v) => v !== 0).length).toBe(1);
  });

  it("out-of-space badge appears exactly when the server flag is set", async () => {
    api.route("POST /v1/whatif", (_url, body) => {
      const factors = (body as { factors: Record<string, number> }).factors;
      const outside = Math.abs(factors["stock"] ?? 0) > 0.157;
      return { payload: whatifPayload({ out_of_space: outside }) };
    });
    const { container, panel } = setup(api);

    panel.setSlider("stock", 0.05);
    await flushTimers();
    await panel.settled();
    expect(container.querySelector(".out-of-space-badge")).toBeNull();

    panel.setSlider("stock", 0.3); // beyond the soft bound
    await flushTimers();
    await panel.settled();
    expect(container.querySelector(".out-of-space-badge")).not.toBeNull();
  });

  it("renders within 200 ms of response receipt", async () => {
    const { panel } = setup(api);
    await panel.refresh();
    expect(panel.lastRenderLatencyMs).not.toBeNull();
    expect(panel.lastRenderLatencyMs!).toBeLessThan(200);
  });

  it("a new slider move cancels the in-flight round trip", async () => {
    api.hold("/v1/whatif");
    api.route("POST /v1/whatif", (_url, body) => {
      const factors = (body as { factors: Record<string, number> }).factors;
      return {
        payload: whatifPayload({
          snapshot: snapshot({ sr: factors["stock"] === -0.05 ? 1.111 : 2.222 }),
        }),
      };
    });
    const { container, panel } = setup(api);
    panel.setSlider("stock", -0.05); // will be aborted
    await flushTimers();
    panel.setSlider("stock", -0.10);
    await flushTimers();
    api.release("/v1/whatif");
    await panel.settled();
    await flushTimers();
    // only the second response may render
    expect(container.querySelector<HTMLElement>(".headline-sr")!.dataset.value).toBe("2.222");
    expect(api.callsTo("/v1/whatif").length).toBe(2);
  });

  it("failures mark last-good values stale and retry recovers", async () => {
    const { container, panel } = setup(api);
    await panel.refresh();
    const before = container.querySelector<HTMLElement>(".headline-sr")!.dataset.value;

    api.route("POST /v1/whatif", () => ({ status: 500, payload: { error: "boom" } }));
    panel.setSlider("stock", 0.02);
    await flushTimers();
    await panel.settled();
    expect(container.classList.contains("stale")).toBe(true);
    // numbers did not change optimistically
    expect(container.querySelector<HTMLElement>(".headline-sr")!.dataset.value).toBe(before);

    api.route("POST /v1/whatif", () => ({ payload: whatifPayload({ snapshot: snapshot({ sr: 3.5 }) }) }));
    (container.querySelector<HTMLButtonElement>("button.retry"))!.click();
    await flushTimers();
    await panel.settled();
    expect(container.classList.contains("stale")).toBe(false);
    expect(container.querySelector<HTMLElement>(".headline-sr")!.dataset.value).toBe("3.5");
  });
});
