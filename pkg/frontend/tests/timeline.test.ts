import { describe, expect, it } from 'vitest';

import { POSTURE_LABELS } from '../src/types.js';
import {
  binForTimestamp, citationTarget, engagementSeries, stackBars,
} from '../src/timeline.js';
import histogramFixture from './fixtures/posture_histogram.json';
import chunksFixture from './fixtures/chunk_analyses.json';
import type { ChunkAnalysis, PostureHistogram } from '../src/types.js';

const histogram = histogramFixture as PostureHistogram;
const chunks = chunksFixture as ChunkAnalysis[];

describe('stackBars', () => {
  it('reproduces the API histogram counts exactly', () => {
    const bars = stackBars(histogram);
    expect(bars).toHaveLength(histogram.bins.length);
    bars.forEach((bar, i) => {
      const bin = histogram.bins[i];
      expect(bar.tStartMs).toBe(bin.t_start_ms);
      for (const segment of bar.segments) {
        expect(segment.count).toBe(bin.counts[segment.label] ?? 0);
        expect(segment.y1 - segment.y0).toBe(segment.count);
      }
      const total = Object.values(bin.counts).reduce((a, b) => a + b, 0);
      expect(bar.total).toBe(total);
    });
  });

  it('stacks contiguously from zero', () => {
    for (const bar of stackBars(histogram)) {
      let cursor = 0;
      for (const segment of bar.segments) {
        expect(segment.y0).toBe(cursor);
        cursor = segment.y1;
      }
      expect(cursor).toBe(bar.total);
    }
  });

  it('always emits one segment per posture label', () => {
    for (const bar of stackBars(histogram)) {
      expect(bar.segments.map((s) => s.label)).toEqual([...POSTURE_LABELS]);
    }
  });

  it('handles an empty histogram', () => {
    expect(stackBars({ bin_s: 60, bins: [] })).toEqual([]);
  });
});

describe('binForTimestamp', () => {
  it('maps timestamps to their bin', () => {
    expect(binForTimestamp(histogram, 0)).toBe(0);
    expect(binForTimestamp(histogram, 59_999)).toBe(0);
    expect(binForTimestamp(histogram, 60_000)).toBe(1);
    expect(binForTimestamp(histogram, 125_000)).toBe(2);
  });

  it('clamps beyond-range timestamps', () => {
    expect(binForTimestamp(histogram, 10 ** 9)).toBe(histogram.bins.length - 1);
    expect(binForTimestamp(histogram, -5)).toBe(0);
  });
});

describe('engagementSeries', () => {
  it('orders points by chunk and keys by track', () => {
    const series = engagementSeries(chunks);
    expect(series.size).toBeGreaterThan(0);
    for (const points of series.values()) {
      const order = points.map((p) => p.chunkIndex);
      expect(order).toEqual([...order].sort((a, b) => a - b));
      for (const p of points) {
        expect(p.engagement).toBeGreaterThanOrEqual(0);
        expect(p.engagement).toBeLessThanOrEqual(1);
      }
    }
  });
});

describe('citationTarget', () => {
  it('resolves a cited transition frame to its timeline bin', () => {
    const chunk = chunks.find((c) =>
      c.tracks.some((t) => t.citations.length > 0));
    expect(chunk).toBeDefined();
    const track = chunk!.tracks.find((t) => t.citations.length > 0)!;
    const target = citationTarget(chunk!, track.citations[0], histogram);
    expect(target).not.toBeNull();
    const transition = track.transitions.find(
      (t) => t.frame === track.citations[0])!;
    expect(target!.tMs).toBe(transition.t_ms);
    expect(target!.binIndex).toBe(binForTimestamp(histogram, transition.t_ms));
  });

  it('returns null for an uncited frame', () => {
    expect(citationTarget(chunks[0], 999_999, histogram)).toBeNull();
  });
});
