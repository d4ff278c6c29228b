/**
 * Typed client for the monitoring API.
 *
 * Carries an AbortSignal through every call so in-flight requests can be
 * cancelled when the user moves on, and caches sensitivity grids keyed by
 * (bundle version, factor pair, grid size) since those are pure functions
 * of the calibration.
 */

import type {
  AttributionResponse,
  BundleResponse,
  DiagramResponse,
  HistoryResponse,
  LatestResponse,
  SensitivityResponse,
  WhatifResponse,
} from "./types";

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

export interface HistoryQuery {
  from?: string;
  to?: string;
  smoothed?: boolean;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private sensitivityCache = new Map<string, SensitivityResponse>();
  private bundleVersion: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  get knownBundleVersion(): string | null {
    return this.bundleVersion;
  }

  private async request<T extends { bundle_version?: string }>(
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ApiError(`network failure for ${path}: ${String(err)}`);
    }
    let payload: unknown;
    try {
      payload = await response.json();
    } catch {
      throw new ApiError(`non-JSON response for ${path}`, response.status);
    }
    if (!response.ok) {
      const message =
        typeof payload === "object" && payload !== null && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(message, response.status);
    }
    const data = payload as T;
    if (data.bundle_version) this.bundleVersion = data.bundle_version;
    return data;
  }

  bundle(signal?: AbortSignal): Promise<BundleResponse> {
    return this.request("/v1/bundle", { signal });
  }

  diagram(signal?: AbortSignal): Promise<DiagramResponse> {
    return this.request("/v1/diagram", { signal });
  }

  latest(signal?: AbortSignal): Promise<LatestResponse> {
    return this.request("/v1/solvency/latest", { signal });
  }

  history(query: HistoryQuery = {}, signal?: AbortSignal): Promise<HistoryResponse> {
    const params = new URLSearchParams();
    if (query.from) params.set("from", query.from);
    if (query.to) params.set("to", query.to);
    if (query.smoothed) params.set("smoothed", "true");
    const suffix = params.toString() ? `?${params.toString()}` : "";
    return this.request(`/v1/solvency/history${suffix}`, { signal });
  }

  whatif(factors: Record<string, number>, signal?: AbortSignal): Promise<WhatifResponse> {
    return this.request("/v1/whatif", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ factors }),
      signal,
    });
  }

  attribution(
    factors: Record<string, number>,
    signal?: AbortSignal,
  ): Promise<AttributionResponse> {
    return this.request("/v1/attribution", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ factors }),
      signal,
    });
  }

  async sensitivity(
    factors: string[],
    grid: number,
    signal?: AbortSignal,
  ): Promise<SensitivityResponse> {
    const key = `${this.bundleVersion ?? "?"}|${factors.join(",")}|${grid}`;
    const cached = this.sensitivityCache.get(key);
    if (cached) return cached;
    const params = new URLSearchParams({ f1: factors[0] ?? "", grid: String(grid) });
    if (factors[1]) params.set("f2", factors[1]);
    const data = await this.request<SensitivityResponse>(
      `/v1/sensitivity?${params.toString()}`,
      { signal },
    );
    this.sensitivityCache.set(
      `${data.bundle_version}|${factors.join(",")}|${grid}`,
      data,
    );
    return data;
  }
}
