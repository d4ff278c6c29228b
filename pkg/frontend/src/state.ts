/** Dashboard state: selections only, never derived numbers. */

import type { DiagramResponse } from "./types";

export interface SliderBounds {
  lo: number;
  hi: number;
}

export interface DashboardState {
  bundleVersion: string | null;
  dateRange: { from: string | null; to: string | null };
  smoothed: boolean;
  sliders: Record<string, number>;
  sensitivityFactors: string[];
  sensitivityGrid: number;
}

export function initialState(): DashboardState {
  return {
    bundleVersion: null,
    dateRange: { from: null, to: null },
    smoothed: false,
    sliders: {},
    sensitivityFactors: [],
    sensitivityGrid: 11,
  };
}

/**
 * Slider ranges come from the probable-interval bounds served by the
 * diagram endpoint.  They are soft: values beyond them stay legal and the
 * server's out-of-space flag drives the warning badge.
 */
export function sliderBounds(diagram: DiagramResponse): Record<string, SliderBounds> {
  const bounds: Record<string, SliderBounds> = {};
  for (const factor of diagram.factors) {
    bounds[factor.id] = { lo: factor.lo, hi: factor.hi };
  }
  return bounds;
}

export function zeroSliders(factorIds: string[]): Record<string, number> {
  const sliders: Record<string, number> = {};
  for (const id of factorIds) sliders[id] = 0;
  return sliders;
}
