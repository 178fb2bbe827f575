// Heatmap cell geometry: normalize server counts to colors and flag dead
// zones (zero-count cells whose center lies in the seating region).

import { viridis } from './colors.js';
import type { Heatmap, Layout, LayoutRegion } from './types.js';

export interface HeatCell {
  col: number;
  row: number;
  count: number;
  color: string;
  deadZone: boolean;
}

function inRegion(region: LayoutRegion, cx: number, cy: number): boolean {
  const [x0, y0, x1, y1] = region.rect;
  return x0 <= cx && cx < x1 && y0 <= cy && cy < y1;
}

export function heatCells(hm: Heatmap, layout: Layout | null): HeatCell[] {
  const peak = Math.max(1, ...hm.counts);
  const seating = layout?.regions.find((r) => r.name === 'seating') ?? null;
  const cells: HeatCell[] = [];
  for (let row = 0; row < hm.grid_h; row += 1) {
    const cy = (row + 0.5) / hm.grid_h;
    for (let col = 0; col < hm.grid_w; col += 1) {
      const cx = (col + 0.5) / hm.grid_w;
      const count = hm.counts[row * hm.grid_w + col];
      cells.push({
        col,
        row,
        count,
        color: viridis(count / peak),
        deadZone: count === 0 && seating !== null && inRegion(seating, cx, cy),
      });
    }
  }
  return cells;
}

export function totalSamples(hm: Heatmap): number {
  return hm.counts.reduce((a, b) => a + b, 0);
}
