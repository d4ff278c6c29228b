/** Sensitivity explorer: payload fidelity, hover values, caching. */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/client";
import { SensitivityExplorer } from "../src/sensitivity";
import { MockApi, sensitivityPayload } from "./mock_api";

describe("sensitivity explorer", () => {
  let api: MockApi;
  let container: HTMLElement;
  let client: ApiClient;
  let explorer: SensitivityExplorer;

  beforeEach(() => {
    api = new MockApi();
    document.body.innerHTML = "<div id='s'></div>";
    container = document.getElementById("s") as HTMLElement;
    client = new ApiClient("http://mock.test", api.fetch);
    explorer = new SensitivityExplorer(client, container);
  });

  it("a single-point grid renders one labelled value", async () => {
    api.route("GET /v1/sensitivity", () => ({
      payload: sensitivityPayload({
        factors: ["stock"],
        axes: [[0.0]],
        sr: [3.2689],
        nav: [4192.31],
      }),
    }));
    await explorer.show(["stock"], 1);
    const points = container.querySelectorAll(".curve-point");
    expect(points.length).toBe(1);
    expect(points[0]!.querySelector<HTMLElement>(".sr")!.dataset.value).toBe("3.2689");
  });

  it("heatmap cells equal the grid payload exactly, hover shows the ratio", async () => {
    const payload = sensitivityPayload();
    await explorer.show(["stock", "rates"], 3);
    const cells = container.querySelectorAll<HTMLElement>(".heat-cell");
    const grid = payload.sr as number[][];
    expect(cells.length).toBe(9);
    cells.forEach((cell) => {
      const i = Number(cell.dataset.i);
      const k = Number(cell.dataset.k);
      expect(cell.dataset.value).toBe(String(grid[i]![k]));
      expect(cell.title).toBe(String(grid[i]![k]));
    });
  });

  it("repeat requests hit the cache; switching the pair refetches", async () => {
    await explorer.show(["stock", "rates"], 3);
    expect(api.callsTo("/v1/sensitivity").length).toBe(1);
    await explorer.show(["stock", "rates"], 3);
    expect(api.callsTo("/v1/sensitivity").length).toBe(1); // cached
    await explorer.show(["stock", "spread_corp"], 3);
    expect(api.callsTo("/v1/sensitivity").length).toBe(2);
    await explorer.show(["stock", "rates"], 5); // different grid size
    expect(api.callsTo("/v1/sensitivity").length).toBe(3);
    const last = api.callsTo("/v1/sensitivity")[2]!;
    expect(last.url.searchParams.get("grid")).toBe("5");
    expect(last.url.searchParams.get("f1")).toBe("stock");
    expect(last.url.searchParams.get("f2")).toBe("rates");
  });

  it("request failure marks the panel stale", async () => {
    api.route("GET /v1/sensitivity", () => ({ status: 500, payload: { error: "down" } }));
    await expect(explorer.show(["stock", "rates"], 3)).rejects.toThrow();
    expect(container.classList.contains("stale")).toBe(true);
  });
});
