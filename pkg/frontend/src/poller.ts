import { JobRecord, ServiceApiError, ServiceClient } from "./api.js";

export const POLL_INTERVAL_MS = 500;
export const MAX_BACKOFF_MS = 8000;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Poll a job until it settles.
 *
 * Cadence is 500 ms; transport errors and 5xx responses double the delay up
 * to 8 s, and the next good response resets it. Client errors (an unknown
 * job id) propagate immediately.
 */
export async function pollJob(
  client: ServiceClient,
  jobId: string,
  onUpdate?: (job: JobRecord) => void,
): Promise<JobRecord> {
  let delay = POLL_INTERVAL_MS;
  for (;;) {
    let job: JobRecord;
    try {
      job = await client.getJob(jobId);
    } catch (error) {
      if (error instanceof ServiceApiError && error.status < 500) throw error;
      delay = Math.min(delay * 2, MAX_BACKOFF_MS);
      await sleep(delay);
      continue;
    }
    delay = POLL_INTERVAL_MS;
    onUpdate?.(job);
    if (job.state === "done" || job.state === "failed") return job;
    await sleep(delay);
  }
}
