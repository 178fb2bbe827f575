// Upload flow: post the session, pick a layout, submit the job. Errors are
// carried through verbatim — a retention violation lists the offending
// frame indices, a schema error keeps its frame/person locus.

import { ApiClient, ApiRequestError } from './api.js';

export type UploadOutcome =
  | { kind: 'submitted'; sessionId: string; jobId: string }
  | { kind: 'error'; code: string; message: string; offending?: number[] };

export async function uploadAndSubmit(
  api: ApiClient,
  sessionRaw: string,
  layoutId: string,
): Promise<UploadOutcome> {
  try {
    const created = await api.uploadSession(sessionRaw);
    const job = await api.submitJob(created.session_id, layoutId);
    return {
      kind: 'submitted',
      sessionId: created.session_id,
      jobId: job.job_id,
    };
  } catch (err) {
    if (err instanceof ApiRequestError) {
      return {
        kind: 'error',
        code: err.error.code,
        message: err.error.message,
        offending: err.error.detail?.offending_indices,
      };
    }
    throw err;
  }
}
