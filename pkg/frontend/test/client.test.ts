/** API client: routing, error surfacing, bundle-version tracking. */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/client";
import { BUNDLE_VERSION, MockApi } from "./mock_api";

describe("api client", () => {
  let api: MockApi;
  let client: ApiClient;

  beforeEach(() => {
    api = new MockApi();
    client = new ApiClient("http://mock.test", api.fetch);
  });

  it("parses payloads and tracks the bundle version", async () => {
    const bundle = await client.bundle();
    expect(bundle.factor_ids).toContain("stock");
    expect(client.knownBundleVersion).toBe(BUNDLE_VERSION);
  });

  it("posts what-if factor maps as JSON bodies", async () => {
    await client.whatif({ stock: -0.2, rates: 0.004 });
    const call = api.callsTo("/v1/whatif")[0]!;
    expect(call.method).toBe("POST");
    expect(call.body).toEqual({ factors: { stock: -0.2, rates: 0.004 } });
  });

  it("surfaces server errors with their message", async () => {
    api.route("POST /v1/whatif", () => ({
      status: 400,
      payload: { error: "unknown factor ids ['fx']" },
    }));
    await expect(client.whatif({ fx: 0.1 })).rejects.toThrowError(ApiError);
    await expect(client.whatif({ fx: 0.1 })).rejects.toThrow(/unknown factor ids/);
  });

  it("propagates aborts unchanged", async () => {
    api.hold("/v1/whatif");
    const controller = new AbortController();
    const pending = client.whatif({ stock: 0 }, controller.signal);
    controller.abort();
    await expect(pending).rejects.toMatchObject({ name: "AbortError" });
    api.release("/v1/whatif");
  });
});
