/**
 * Wire types of the monitoring API.
 *
 * These mirror the server payloads exactly; the dashboard performs no
 * solvency arithmetic of its own, so every number rendered on screen
 * originates from one of these structures.
 */

export interface SnapshotPayload {
  nav_central: number;
  vif: number;
  dtl: number;
  adj: number;
  bscr: number;
  scr: number;
  own_funds: number;
  sr: number | null;
  marginals: {
    monitored: Record<string, number>;
    frozen: Record<string, number>;
  } | null;
  date: string | null;
  flags: string[];
}

export interface BundleResponse {
  bundle_version: string;
  calibration_date: string;
  config_hash: string;
  factor_ids: string[];
  shocks: string[];
  alpha: number;
  smoothing_window: number;
  attribution_order: string[];
  calibration_snapshot: SnapshotPayload;
  records: number;
}

export interface DiagramFactor {
  id: string;
  lo: number;
  hi: number;
  current: number;
  out_of_space: boolean;
}

export interface DiagramResponse {
  bundle_version: string;
  as_of: string;
  factors: DiagramFactor[];
}

export interface HistoryResponse {
  bundle_version: string;
  dates: string[];
  sr: (number | null)[];
  validity: string[];
  smoothed_sr?: number[];
}

export interface WhatifResponse {
  bundle_version: string;
  transition: Record<string, number>;
  snapshot: SnapshotPayload;
  out_of_space: boolean;
}

export interface AttributionResponse {
  bundle_version: string;
  order: string[];
  base_sr: number;
  step_srs: number[];
  deltas: number[];
  total_delta: number;
}

export interface SensitivityResponse {
  bundle_version: string;
  factors: string[];
  axes: number[][];
  sr: number[] | number[][];
  nav: number[] | number[][];
}

export interface LatestResponse {
  bundle_version: string;
  record: {
    date: string;
    observed: Record<string, unknown>;
    transition: number[];
    snapshot: SnapshotPayload;
    validity: string;
    bundle_version: string;
    smoothed_sr: number | null;
  };
}

export interface ApiErrorPayload {
  bundle_version?: string;
  error: string;
}
