// Color assignments shared by the timeline and heatmap views.

import { POSTURE_LABELS, type PostureLabel } from './types.js';

// Unknown is a neutral gray: it reports missing evidence, not a judgment.
export const POSTURE_COLORS: Record<PostureLabel, string> = {
  Upright: '#2a9d8f',
  LeaningForward: '#457b9d',
  Slouching: '#e9c46a',
  Sleeping: '#e76f51',
  Standing: '#8338ec',
  Unknown: '#9e9e9e',
};

export interface LegendEntry {
  label: PostureLabel;
  color: string;
}

/** Legend entries in declaration order; always covers all six labels. */
export function postureLegend(): LegendEntry[] {
  return POSTURE_LABELS.map((label) => ({
    label,
    color: POSTURE_COLORS[label],
  }));
}

// Compact stops from the perceptually-uniform viridis map.
const VIRIDIS: [number, number, number][] = [
  [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142],
  [38, 130, 142], [31, 158, 137], [53, 183, 121], [109, 205, 89],
  [180, 222, 44], [253, 231, 37],
];

/** Map t in [0,1] to a viridis CSS color (linear interpolation). */
export function viridis(t: number): string {
  const x = Math.min(1, Math.max(0, t)) * (VIRIDIS.length - 1);
  const i = Math.min(VIRIDIS.length - 2, Math.floor(x));
  const f = x - i;
  const mix = (a: number, b: number) => Math.round(a + (b - a) * f);
  const [r1, g1, b1] = VIRIDIS[i];
  const [r2, g2, b2] = VIRIDIS[i + 1];
  return `rgb(${mix(r1, r2)}, ${mix(g1, g2)}, ${mix(b1, b2)})`;
}
