// Progress-view state machine. The server replays its latest event on
// every (re)connect, so a reconnect renders current state from the first
// received event; the displayed fraction is clamped monotone so the bar
// never runs backwards across resubscriptions.

import type { JobState, ProgressEvent } from './types.js';

export interface ProgressViewState {
  state: JobState | 'connecting';
  fraction: number;
  etaS: number | null;
  stageIndex: number | null;
  stageTotal: number | null;
  reason: string | null;
  terminal: boolean;
  eventsSeen: number;
}

export function initialProgress(): ProgressViewState {
  return {
    state: 'connecting',
    fraction: 0,
    etaS: null,
    stageIndex: null,
    stageTotal: null,
    reason: null,
    terminal: false,
    eventsSeen: 0,
  };
}

export function applyEvent(
  prev: ProgressViewState,
  event: ProgressEvent,
): ProgressViewState {
  return {
    state: event.state,
    fraction: Math.max(prev.fraction, event.fraction),
    etaS: event.eta_s,
    stageIndex: event.stage_index,
    stageTotal: event.stage_total,
    reason: event.reason ?? null,
    terminal: event.state === 'complete' || event.state === 'failed',
    eventsSeen: prev.eventsSeen + 1,
  };
}

export function stageText(s: ProgressViewState): string {
  switch (s.state) {
    case 'connecting':
      return 'connecting…';
    case 'queued':
      return 'queued';
    case 'running_vision':
      return 'extracting tracks and attention';
    case 'running_micro':
      return `analyzing minute ${fmtStage(s)}`;
    case 'running_synthesis':
      return `synthesizing 5-minute summary ${fmtStage(s)}`;
    case 'running_final':
      return 'writing the session report';
    case 'complete':
      return 'complete';
    case 'failed':
      return `failed: ${s.reason ?? 'unknown reason'}`;
  }
}

function fmtStage(s: ProgressViewState): string {
  if (s.stageIndex === null || s.stageTotal === null) return '';
  return `${s.stageIndex + 1}/${s.stageTotal}`;
}

export function etaText(s: ProgressViewState): string {
  if (s.terminal || s.etaS === null) return '';
  if (s.etaS < 1) return 'under a second left';
  if (s.etaS < 120) return `~${Math.round(s.etaS)}s left`;
  return `~${Math.round(s.etaS / 60)}min left`;
}
