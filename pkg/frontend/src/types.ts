// Wire-format types for the classpulse API. The dashboard is strictly a
// client: every number displayed comes from these payloads, never from a
// client-side recomputation.

export const POSTURE_LABELS = [
  'Upright',
  'LeaningForward',
  'Slouching',
  'Sleeping',
  'Standing',
  'Unknown',
] as const;

export type PostureLabel = (typeof POSTURE_LABELS)[number];

export interface ApiError {
  code: string;
  message: string;
  detail?: { offending_indices?: number[]; [key: string]: unknown };
}

export interface SessionCreated {
  session_id: string;
  retention: {
    frames_total: number;
    frames_deleted: number;
    offending_indices: number[];
    clean: boolean;
  };
}

export interface LayoutRegion {
  name: string;
  rect: [number, number, number, number]; // x0, y0, x1, y1 normalized
}

export interface Layout {
  layout_id: string;
  regions: LayoutRegion[];
}

export type JobState =
  | 'queued'
  | 'running_vision'
  | 'running_micro'
  | 'running_synthesis'
  | 'running_final'
  | 'complete'
  | 'failed';

export interface JobStatus {
  job_id: string;
  session_id: string;
  layout_id: string;
  state: JobState;
  stage_index: number | null;
  stage_total: number | null;
  reason: string | null;
  progress: number;
  eta_s: number;
}

export interface ProgressEvent {
  job_id: string;
  state: JobState;
  fraction: number;
  eta_s: number;
  t: number;
  seq: number;
  stage_index: number | null;
  stage_total: number | null;
  reason?: string;
}

export interface HistogramBin {
  t_start_ms: number;
  counts: Record<string, number>;
}

export interface PostureHistogram {
  bin_s: number;
  bins: HistogramBin[];
}

export interface Heatmap {
  grid_w: number;
  grid_h: number;
  window: [number, number];
  counts: number[];
}

export interface TrackSummary {
  track_id: number;
  dominant_posture: string;
  transitions: { frame: number; t_ms: number; from: string; to: string }[];
  attention: Record<string, number>;
  engagement: number;
  citations: number[];
}

export interface ChunkAnalysis {
  chunk_index: number;
  frame_range: number[];
  tracks: TrackSummary[];
  degraded: boolean;
}

export interface FinalReport {
  session_id: string;
  tracks: {
    track_id: number;
    narrative: string;
    mean_engagement: number;
    dominant_posture: string;
    trend: string;
  }[];
  attention: Record<string, number>;
  flagged_periods: { t_start_ms: number; t_end_ms: number; reason: string }[];
  dead_zones: Record<string, unknown>;
  covered_groups: number[];
  n_chunks: number;
}

export interface JobResults {
  final_report: FinalReport;
  chunks: string[];
  syntheses: string[];
  dead_zones: {
    cells?: [number, number][];
    coverage?: number;
    flagged?: boolean;
    available?: boolean;
  };
}
