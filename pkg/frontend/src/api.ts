// Thin fetch wrapper. Non-2xx responses carry exactly one ApiError object,
// which is surfaced verbatim (never swallowed) via ApiRequestError.

import type {
  ApiError, Heatmap, JobResults, JobStatus, Layout, PostureHistogram,
  SessionCreated,
} from './types.js';

export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly error: ApiError,
  ) {
    super(`${error.code}: ${error.message}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl = '',
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiRequestError(resp.status, body as ApiError);
    }
    return body as T;
  }

  uploadSession(raw: string): Promise<SessionCreated> {
    return this.request('/api/sessions', { method: 'POST', body: raw });
  }

  createLayout(layout: Layout): Promise<{ layout_id: string }> {
    return this.request('/api/layouts', {
      method: 'POST',
      body: JSON.stringify(layout),
    });
  }

  listLayouts(): Promise<{ layouts: string[] }> {
    return this.request('/api/layouts');
  }

  getLayout(layoutId: string): Promise<Layout> {
    return this.request(`/api/layouts/${layoutId}`);
  }

  submitJob(sessionId: string, layoutId: string): Promise<{ job_id: string }> {
    return this.request('/api/jobs', {
      method: 'POST',
      body: JSON.stringify({ session_id: sessionId, layout_id: layoutId }),
    });
  }

  listJobs(): Promise<{ jobs: JobStatus[] }> {
    return this.request('/api/jobs');
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request(`/api/jobs/${jobId}`);
  }

  getResults(jobId: string): Promise<JobResults> {
    return this.request(`/api/jobs/${jobId}/results`);
  }

  getHeatmap(jobId: string, fromMs?: number, toMs?: number): Promise<Heatmap> {
    const params = new URLSearchParams();
    if (fromMs !== undefined) params.set('from_ms', String(fromMs));
    if (toMs !== undefined) params.set('to_ms', String(toMs));
    const qs = params.toString();
    return this.request(`/api/jobs/${jobId}/heatmap${qs ? '?' + qs : ''}`);
  }

  getPostures(jobId: string, binS = 60): Promise<PostureHistogram> {
    return this.request(`/api/jobs/${jobId}/postures?bin_s=${binS}`);
  }

  getChunk(link: string): Promise<import('./types.js').ChunkAnalysis> {
    return this.request(link);
  }
}

export function progressUrl(jobId: string, base = ''): string {
  const origin = base ||
    (typeof location !== 'undefined' ? location.origin : 'http://localhost');
  return origin.replace(/^http/, 'ws') + `/api/jobs/${jobId}/progress`;
}
