// DOM rendering. Views are small render-from-state functions over plain
// elements; all data arrives through the API client and the pure
// transforms, so these stay thin.

import { heatCells } from './heatmap.js';
import { postureLegend } from './colors.js';
import { etaText, stageText, type ProgressViewState } from './progress.js';
import {
  binForTimestamp, engagementSeries, stackBars,
} from './timeline.js';
import type {
  ChunkAnalysis, FinalReport, Heatmap, Layout, PostureHistogram,
} from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

export function renderEmptyState(message: string): HTMLElement {
  return el('p', { class: 'empty-state' }, message);
}

// -- progress ---------------------------------------------------------------

export function renderProgress(state: ProgressViewState): HTMLElement {
  const root = el('div', { class: 'progress-view' });
  const bar = el('div', { class: 'progress-bar' });
  const fill = el('div', {
    class: 'progress-fill',
    style: `width: ${(state.fraction * 100).toFixed(1)}%`,
  });
  bar.appendChild(fill);
  root.appendChild(bar);
  root.appendChild(el('p', { class: 'progress-stage' }, stageText(state)));
  const eta = etaText(state);
  if (eta) root.appendChild(el('p', { class: 'progress-eta' }, eta));
  if (state.state === 'failed' && state.reason) {
    root.appendChild(el('p', { class: 'error' }, state.reason));
  }
  return root;
}

// -- heatmap ----------------------------------------------------------------

export function renderHeatmap(
  hm: Heatmap,
  layout: Layout | null,
  showRegions: boolean,
): HTMLElement {
  const total = hm.counts.reduce((a, b) => a + b, 0);
  if (total === 0) {
    return renderEmptyState('No gaze samples in this window yet.');
  }
  const width = 640;
  const height = Math.round((width * hm.grid_h) / hm.grid_w);
  const svg = svgEl('svg', {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    class: 'heatmap',
  });
  const cellW = width / hm.grid_w;
  const cellH = height / hm.grid_h;
  for (const cell of heatCells(hm, layout)) {
    const rect = svgEl('rect', {
      x: (cell.col * cellW).toFixed(2),
      y: (cell.row * cellH).toFixed(2),
      width: cellW.toFixed(2),
      height: cellH.toFixed(2),
      fill: cell.color,
    });
    if (cell.deadZone) {
      rect.setAttribute('class', 'dead-zone');
      rect.setAttribute('stroke', '#ff5555');
      rect.setAttribute('stroke-width', '1');
    }
    svg.appendChild(rect);
  }
  if (showRegions && layout) {
    for (const region of layout.regions) {
      const [x0, y0, x1, y1] = region.rect;
      svg.appendChild(svgEl('rect', {
        x: (x0 * width).toFixed(1),
        y: (y0 * height).toFixed(1),
        width: ((x1 - x0) * width).toFixed(1),
        height: ((y1 - y0) * height).toFixed(1),
        fill: 'none',
        stroke: 'white',
        'stroke-dasharray': '4 3',
        class: `region-outline region-${region.name}`,
      }));
      const label = svgEl('text', {
        x: (x0 * width + 4).toFixed(1),
        y: (y0 * height + 14).toFixed(1),
        fill: 'white',
        'font-size': '11',
      });
      label.textContent = region.name;
      svg.appendChild(label);
    }
  }
  const wrap = el('div', { class: 'heatmap-view' });
  wrap.appendChild(svg as unknown as HTMLElement);
  return wrap;
}

// -- timeline -----------------------------------------------------------------

export function renderLegend(): HTMLElement {
  const legend = el('ul', { class: 'legend' });
  for (const entry of postureLegend()) {
    const item = el('li', { 'data-label': entry.label });
    const swatch = el('span', {
      class: 'swatch',
      style: `background: ${entry.color}`,
    });
    item.appendChild(swatch);
    item.appendChild(document.createTextNode(entry.label));
    legend.appendChild(item);
  }
  return legend;
}

export function renderTimeline(
  histogram: PostureHistogram,
  chunks: ChunkAnalysis[],
  onBinFocus?: (binIndex: number) => void,
): HTMLElement {
  const root = el('div', { class: 'timeline-view' });
  if (histogram.bins.length === 0) {
    root.appendChild(renderEmptyState('No posture observations yet.'));
    return root;
  }
  const bars = stackBars(histogram);
  const width = 720;
  const height = 220;
  const peak = Math.max(1, ...bars.map((b) => b.total));
  const barW = width / bars.length;
  const svg = svgEl('svg', {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    class: 'timeline',
  });
  bars.forEach((bar, i) => {
    for (const seg of bar.segments) {
      if (seg.count === 0) continue;
      const h = ((seg.y1 - seg.y0) / peak) * height;
      const y = height - (seg.y1 / peak) * height;
      const rect = svgEl('rect', {
        x: (i * barW + 1).toFixed(2),
        y: y.toFixed(2),
        width: Math.max(barW - 2, 1).toFixed(2),
        height: h.toFixed(2),
        fill: seg.color,
        'data-bin': String(bar.binIndex),
        'data-posture': seg.label,
        'data-count': String(seg.count),
      });
      svg.appendChild(rect);
    }
  });
  root.appendChild(svg as unknown as HTMLElement);
  root.appendChild(renderLegend());

  // Engagement sparklines and clickable citations under the chart.
  const series = engagementSeries(chunks);
  if (series.size > 0) {
    const sparks = el('div', { class: 'sparklines' });
    for (const [trackId, points] of [...series.entries()].sort(
      (a, b) => a[0] - b[0],
    )) {
      const row = el('div', { class: 'sparkline-row' });
      row.appendChild(el('span', { class: 'spark-label' },
                         `student ${trackId}`));
      const spark = svgEl('svg', {
        viewBox: '0 0 120 24',
        width: '120',
        height: '24',
        class: 'sparkline',
      });
      const n = Math.max(points.length - 1, 1);
      const path = points
        .map((p, i) =>
          `${i === 0 ? 'M' : 'L'}${((i / n) * 118 + 1).toFixed(1)},` +
          `${(22 - p.engagement * 20).toFixed(1)}`)
        .join(' ');
      spark.appendChild(svgEl('path', {
        d: path, fill: 'none', stroke: '#457b9d', 'stroke-width': '1.5',
      }));
      row.appendChild(spark as unknown as HTMLElement);
      sparks.appendChild(row);
    }
    root.appendChild(sparks);

    const citations = el('div', { class: 'citations' });
    for (const chunk of chunks) {
      for (const track of chunk.tracks) {
        for (const transition of track.transitions) {
          const link = el('button', {
            class: 'citation',
            'data-t-ms': String(transition.t_ms),
          }, `#${transition.frame} ${transition.from}→${transition.to}`);
          link.addEventListener('click', () => {
            onBinFocus?.(binForTimestamp(histogram, transition.t_ms));
          });
          citations.appendChild(link);
        }
      }
    }
    if (citations.childNodes.length > 0) root.appendChild(citations);
  }
  return root;
}

// -- report --------------------------------------------------------------------

export function renderFinalReport(report: FinalReport): HTMLElement {
  const root = el('div', { class: 'report-view' });
  root.appendChild(el('h3', {}, `Session ${report.session_id}`));
  const list = el('ul', { class: 'narratives' });
  for (const track of report.tracks) {
    list.appendChild(el('li', {}, track.narrative));
  }
  root.appendChild(list);
  if (report.flagged_periods.length > 0) {
    const flags = el('ul', { class: 'flags' });
    for (const p of report.flagged_periods) {
      const mins = `${Math.round(p.t_start_ms / 60000)}–` +
        `${Math.round(p.t_end_ms / 60000)} min`;
      flags.appendChild(el('li', {}, `${mins}: ${p.reason}`));
    }
    root.appendChild(el('h4', {}, 'Flagged periods'));
    root.appendChild(flags);
  }
  return root;
}
