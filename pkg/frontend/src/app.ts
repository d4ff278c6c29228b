/**
 * Dashboard bootstrap: fetches the bundle and diagram, then wires the four
 * panels (gauges, ratio chart, what-if steering, sensitivity explorer).
 * Every panel renders server payloads only; failures surface as stale-data
 * banners rather than blank screens.
 */

import { ApiClient } from "./client";
import { el, clear } from "./dom";
import { renderDiagram } from "./gauges";
import { sliderBounds } from "./state";
import { SensitivityExplorer } from "./sensitivity";
import { renderTimeseries } from "./timeseries";
import { WhatifPanel } from "./whatif";

export interface Dashboard {
  client: ApiClient;
  whatif: WhatifPanel;
  sensitivity: SensitivityExplorer;
  refreshDiagram: () => Promise<void>;
  refreshHistory: (range?: { from?: string; to?: string }, smoothed?: boolean) => Promise<void>;
}

export async function bootstrap(root: HTMLElement, baseUrl: string): Promise<Dashboard> {
  const client = new ApiClient(baseUrl);
  clear(root);

  const header = el("div", { class: "header" });
  const gaugePanel = el("section", { class: "panel gauges-panel" });
  const chartPanel = el("section", { class: "panel chart-panel" });
  const whatifPanel = el("section", { class: "panel whatif-panel" });
  const sensitivityPanel = el("section", { class: "panel sensitivity-panel" });
  root.append(header, gaugePanel, chartPanel, whatifPanel, sensitivityPanel);

  const bundle = await client.bundle();
  header.append(
    el("h1", {}, ["solvency monitoring"]),
    el("span", { class: "bundle-tag" }, [
      `bundle ${bundle.bundle_version} calibrated ${bundle.calibration_date}`,
    ]),
  );

  const refreshDiagram = async () => {
    try {
      renderDiagram(gaugePanel, await client.diagram());
    } catch {
      gaugePanel.classList.add("stale");
    }
  };

  const refreshHistory = async (
    range: { from?: string; to?: string } = {},
    smoothed = false,
  ) => {
    try {
      const history = await client.history({ ...range, smoothed });
      renderTimeseries(chartPanel, history, { smoothed });
      chartPanel.classList.remove("stale");
    } catch {
      chartPanel.classList.add("stale");
    }
  };

  await refreshDiagram();
  await refreshHistory({}, bundle.smoothing_window > 1);

  const diagram = await client.diagram();
  const whatif = new WhatifPanel(client, whatifPanel, bundle.factor_ids, sliderBounds(diagram));
  await whatif.refresh();

  const sensitivity = new SensitivityExplorer(client, sensitivityPanel);
  if (bundle.factor_ids.length >= 2) {
    await sensitivity.show(bundle.factor_ids.slice(0, 2), 11);
  } else if (bundle.factor_ids.length === 1) {
    await sensitivity.show(bundle.factor_ids.slice(0, 1), 11);
  }

  return { client, whatif, sensitivity, refreshDiagram, refreshHistory };
}
