// Stacked-bar geometry for the posture timeline. Pure transform: segment
// heights are the server's histogram counts, untouched — the chart is a
// rendering of the API response, not a recomputation.

import { POSTURE_COLORS } from './colors.js';
import {
  POSTURE_LABELS, type ChunkAnalysis, type PostureHistogram,
  type PostureLabel,
} from './types.js';

export interface BarSegment {
  label: PostureLabel;
  count: number;
  /** Stack offset in observations (bottom edge). */
  y0: number;
  /** Stack top in observations. */
  y1: number;
  color: string;
}

export interface TimelineBar {
  binIndex: number;
  tStartMs: number;
  total: number;
  segments: BarSegment[];
}

export function stackBars(histogram: PostureHistogram): TimelineBar[] {
  return histogram.bins.map((bin, binIndex) => {
    let acc = 0;
    const segments: BarSegment[] = [];
    for (const label of POSTURE_LABELS) {
      const count = bin.counts[label] ?? 0;
      segments.push({
        label,
        count,
        y0: acc,
        y1: acc + count,
        color: POSTURE_COLORS[label],
      });
      acc += count;
    }
    return { binIndex, tStartMs: bin.t_start_ms, total: acc, segments };
  });
}

/** Index of the bin containing the timestamp (for citation clicks). */
export function binForTimestamp(histogram: PostureHistogram, tMs: number): number {
  const binMs = histogram.bin_s * 1000;
  const index = Math.floor(tMs / binMs);
  return Math.min(Math.max(index, 0), Math.max(histogram.bins.length - 1, 0));
}

export interface SparklinePoint {
  chunkIndex: number;
  engagement: number;
}

/** Per-track engagement series from the chunk analyses, in chunk order. */
export function engagementSeries(
  chunks: ChunkAnalysis[],
): Map<number, SparklinePoint[]> {
  const series = new Map<number, SparklinePoint[]>();
  const ordered = [...chunks].sort((a, b) => a.chunk_index - b.chunk_index);
  for (const chunk of ordered) {
    for (const track of chunk.tracks) {
      if (!series.has(track.track_id)) series.set(track.track_id, []);
      series.get(track.track_id)!.push({
        chunkIndex: chunk.chunk_index,
        engagement: track.engagement,
      });
    }
  }
  return series;
}

export interface CitationTarget {
  tMs: number;
  binIndex: number;
}

/** Resolve a citation (frame index within a chunk) to a timeline position. */
export function citationTarget(
  chunk: ChunkAnalysis,
  citation: number,
  histogram: PostureHistogram,
): CitationTarget | null {
  for (const track of chunk.tracks) {
    const hit = track.transitions.find((t) => t.frame === citation);
    if (hit) {
      return { tMs: hit.t_ms, binIndex: binForTimestamp(histogram, hit.t_ms) };
    }
  }
  return null;
}
