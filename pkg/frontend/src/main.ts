// App wiring: hash routes #/upload, #/progress/<job>, #/results/<job>.

import { ApiClient, progressUrl } from './api.js';
import { applyEvent, initialProgress } from './progress.js';
import { uploadAndSubmit } from './upload.js';
import {
  el, renderEmptyState, renderFinalReport, renderHeatmap, renderProgress,
  renderTimeline,
} from './views.js';
import { ProgressSubscription } from './ws.js';
import type { Layout } from './types.js';

const api = new ApiClient();
let activeSubscription: ProgressSubscription | null = null;

function mount(...nodes: HTMLElement[]): void {
  const root = document.getElementById('app');
  if (!root) return;
  root.replaceChildren(...nodes);
  activeSubscription?.stop();
  activeSubscription = null;
}

async function uploadView(): Promise<void> {
  const form = el('form', { class: 'upload' });
  const file = el('input', { type: 'file', accept: 'application/json' });
  const layoutSelect = el('select');
  const { layouts } = await api.listLayouts();
  for (const id of layouts) {
    const option = el('option', { value: id }, id);
    layoutSelect.appendChild(option);
  }
  const submit = el('button', { type: 'submit' }, 'Upload & analyze');
  const errorBox = el('div', { class: 'error-box' });
  form.append(file, layoutSelect, submit, errorBox);
  form.addEventListener('submit', async (ev) => {
    ev.preventDefault();
    errorBox.replaceChildren();
    const chosen = file.files?.[0];
    if (!chosen || !layoutSelect.value) {
      errorBox.appendChild(el('p', { class: 'error' },
                              'Choose a session file and a layout.'));
      return;
    }
    const outcome = await uploadAndSubmit(api, await chosen.text(),
                                          layoutSelect.value);
    if (outcome.kind === 'submitted') {
      location.hash = `#/progress/${outcome.jobId}`;
    } else {
      errorBox.appendChild(
        el('p', { class: 'error' }, `${outcome.code}: ${outcome.message}`));
      if (outcome.offending?.length) {
        errorBox.appendChild(el('p', { class: 'error-detail' },
                                `offending frames: ${outcome.offending.join(', ')}`));
      }
    }
  });
  const heading = el('h2', {}, 'Upload a session');
  mount(heading, form);
}

function progressView(jobId: string): void {
  let state = initialProgress();
  const container = el('div');
  const redraw = () => {
    container.replaceChildren(renderProgress(state));
    if (state.terminal && state.state === 'complete') {
      const link = el('a', { href: `#/results/${jobId}` }, 'View results →');
      container.appendChild(link);
    }
  };
  redraw();
  const sub = new ProgressSubscription(progressUrl(jobId), (event) => {
    state = applyEvent(state, event);
    redraw();
  });
  sub.start();
  mount(el('h2', {}, `Job ${jobId}`), container);
  activeSubscription = sub;
}

async function resultsView(jobId: string): Promise<void> {
  const heading = el('h2', {}, `Results for ${jobId}`);
  try {
    const [results, heatmap] = await Promise.all([
      api.getResults(jobId),
      api.getHeatmap(jobId),
    ]);
    const status = await api.getJob(jobId);
    let layout: Layout | null = null;
    try {
      layout = await api.getLayout(status.layout_id);
    } catch {
      layout = null;
    }
    const chunks = await Promise.all(
      results.chunks.map((link) => api.getChunk(link)));

    // Heatmap controls: region-outline toggle and a window slider that
    // refetches the grid for [0, to_ms).
    const sessionEndMs = heatmap.window[1];
    const heatmapBox = el('div');
    const regionToggle = el('input', { type: 'checkbox', checked: '' });
    const windowSlider = el('input', {
      type: 'range', min: '1', max: String(Math.max(sessionEndMs, 1)),
      value: String(Math.max(sessionEndMs, 1)), step: '60000',
    });
    const windowLabel = el('span', { class: 'window-label' });
    const redrawHeatmap = async () => {
      const toMs = Number(windowSlider.value);
      windowLabel.textContent =
        `window: 0 – ${Math.round(toMs / 60000)} min`;
      const hm = toMs >= sessionEndMs
        ? heatmap
        : await api.getHeatmap(jobId, 0, toMs);
      heatmapBox.replaceChildren(
        renderHeatmap(hm, layout, regionToggle.checked));
    };
    regionToggle.addEventListener('change', () => void redrawHeatmap());
    windowSlider.addEventListener('change', () => void redrawHeatmap());
    await redrawHeatmap();
    const heatmapControls = el('div', { class: 'controls' });
    const toggleLabel = el('label', {}, ' region outlines');
    toggleLabel.prepend(regionToggle);
    heatmapControls.append(toggleLabel, windowSlider, windowLabel);

    // Timeline controls: bin size select; citation clicks focus the bin.
    const timelineBox = el('div');
    const binSelect = el('select');
    for (const s of [60, 120, 300]) {
      binSelect.appendChild(el('option', { value: String(s) }, `${s}s bins`));
    }
    const focusBin = (binIndex: number) => {
      const rects = timelineBox.querySelectorAll('rect[data-bin]');
      rects.forEach((r) => {
        if (Number(r.getAttribute('data-bin')) === binIndex) {
          r.setAttribute('stroke', '#1d2733');
          r.setAttribute('stroke-width', '1.5');
        } else {
          r.removeAttribute('stroke');
        }
      });
      timelineBox.querySelector('svg.timeline')?.scrollIntoView(
        { behavior: 'smooth', block: 'center' });
    };
    const redrawTimeline = async () => {
      const histogram = await api.getPostures(jobId, Number(binSelect.value));
      timelineBox.replaceChildren(
        renderTimeline(histogram, chunks, focusBin));
    };
    binSelect.addEventListener('change', () => void redrawTimeline());
    await redrawTimeline();

    mount(
      heading,
      renderFinalReport(results.final_report),
      el('h3', {}, 'Attention heatmap'),
      heatmapControls,
      heatmapBox,
      el('h3', {}, 'Posture timeline'),
      binSelect,
      timelineBox,
    );
  } catch (err) {
    mount(heading, renderEmptyState(String(err)));
  }
}

function route(): void {
  const hash = location.hash || '#/upload';
  const progress = hash.match(/^#\/progress\/(.+)$/);
  const results = hash.match(/^#\/results\/(.+)$/);
  if (progress) {
    progressView(progress[1]);
  } else if (results) {
    void resultsView(results[1]);
  } else {
    void uploadView();
  }
}

window.addEventListener('hashchange', route);
route();
