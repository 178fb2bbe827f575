// @vitest-environment happy-dom

import { describe, expect, it } from 'vitest';

import { applyEvent, initialProgress } from '../src/progress.js';
import {
  renderHeatmap, renderLegend, renderProgress, renderTimeline,
} from '../src/views.js';
import { POSTURE_LABELS } from '../src/types.js';
import histogramFixture from './fixtures/posture_histogram.json';
import chunksFixture from './fixtures/chunk_analyses.json';
import heatmapFixture from './fixtures/heatmap.json';
import type {
  ChunkAnalysis, Heatmap, Layout, PostureHistogram, ProgressEvent,
} from '../src/types.js';

const histogram = histogramFixture as PostureHistogram;
const chunks = chunksFixture as ChunkAnalysis[];
const heatmap = heatmapFixture as Heatmap;

const LAYOUT: Layout = {
  layout_id: 'rm-1',
  regions: [
    { name: 'board', rect: [0.05, 0.0, 0.55, 0.35] },
    { name: 'seating', rect: [0.05, 0.4, 0.95, 0.75] },
  ],
};

describe('timeline view', () => {
  it('renders stacked bars whose counts equal the histogram JSON exactly', () => {
    const root = renderTimeline(histogram, chunks);
    for (const [i, bin] of histogram.bins.entries()) {
      const rects = [...root.querySelectorAll(`rect[data-bin="${i}"]`)];
      const seen: Record<string, number> = {};
      for (const rect of rects) {
        seen[rect.getAttribute('data-posture')!] =
          Number(rect.getAttribute('data-count'));
      }
      for (const [label, count] of Object.entries(bin.counts)) {
        expect(seen[label] ?? 0).toBe(count);
      }
    }
  });

  it('legend covers all six posture labels including Unknown', () => {
    const legend = renderLegend();
    const labels = [...legend.querySelectorAll('li')].map(
      (li) => li.getAttribute('data-label'));
    expect(labels).toEqual([...POSTURE_LABELS]);
    expect(labels).toContain('Unknown');
  });

  it('renders a non-crashing empty state for zero data', () => {
    const root = renderTimeline({ bin_s: 60, bins: [] }, []);
    expect(root.querySelector('.empty-state')).not.toBeNull();
  });

  it('citation clicks focus the cited bin', () => {
    let focused = -1;
    const root = renderTimeline(histogram, chunks, (bin) => { focused = bin; });
    const citation = root.querySelector('button.citation');
    expect(citation).not.toBeNull();
    (citation as HTMLButtonElement).click();
    const tMs = Number(citation!.getAttribute('data-t-ms'));
    expect(focused).toBe(Math.floor(tMs / (histogram.bin_s * 1000)));
  });
});

describe('heatmap view', () => {
  it('renders one cell per grid position', () => {
    const root = renderHeatmap(heatmap, LAYOUT, true);
    const cells = root.querySelectorAll('svg > rect:not(.region-outline)');
    expect(cells.length).toBe(heatmap.grid_w * heatmap.grid_h);
  });

  it('outlines layout regions when toggled on', () => {
    const on = renderHeatmap(heatmap, LAYOUT, true);
    expect(on.querySelectorAll('.region-outline').length).toBe(
      LAYOUT.regions.length);
    const off = renderHeatmap(heatmap, LAYOUT, false);
    expect(off.querySelectorAll('.region-outline').length).toBe(0);
  });

  it('flags zero-count cells inside seating as dead zones', () => {
    const sparse: Heatmap = {
      grid_w: 4, grid_h: 4, window: [0, 1000],
      counts: [2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    };
    const layout: Layout = {
      layout_id: 'x',
      regions: [{ name: 'seating', rect: [0.0, 0.5, 1.0, 1.0] }],
    };
    const root = renderHeatmap(sparse, layout, false);
    // bottom two rows (8 cells) are in seating and all zero
    expect(root.querySelectorAll('.dead-zone').length).toBe(8);
  });

  it('renders an empty state when the window has no samples', () => {
    const empty: Heatmap = { grid_w: 4, grid_h: 4, window: [0, 0],
                             counts: new Array(16).fill(0) };
    const root = renderHeatmap(empty, LAYOUT, true);
    expect(root.querySelector('svg')).toBeNull();
    expect(root.classList.contains('empty-state')).toBe(true);
  });
});

describe('progress view', () => {
  function event(partial: Partial<ProgressEvent>): ProgressEvent {
    return {
      job_id: 'j', state: 'queued', fraction: 0, eta_s: 5, t: 0, seq: 0,
      stage_index: null, stage_total: null, ...partial,
    };
  }

  it('renders the snapshot state after a single event', () => {
    const state = applyEvent(initialProgress(), event({
      state: 'running_micro', fraction: 0.42, stage_index: 24,
      stage_total: 60,
    }));
    const root = renderProgress(state);
    const fill = root.querySelector('.progress-fill') as HTMLElement;
    expect(fill.getAttribute('style')).toContain('width: 42.0%');
    expect(root.textContent).toContain('25/60');
  });

  it('shows the failure reason', () => {
    const state = applyEvent(initialProgress(),
                             event({ state: 'failed', reason: 'exploded' }));
    const root = renderProgress(state);
    expect(root.textContent).toContain('exploded');
  });
});
