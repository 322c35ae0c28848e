// Polling helper for async step execution: the service answers a run request
// with 202 plus a poll URL, and the step status endpoint reports state
// "running" until the worker finishes.

import { getStep, isAccepted, runStep } from './api.js';
import type { SessionParams, StepName, StepResponse } from './types.js';

export const DEFAULT_POLL_INTERVAL_MS = 750;
export const MAX_POLL_DURATION_MS = 5 * 60 * 1000;

export async function pollStepUntilIdle(
  sessionId: string,
  step: StepName,
  intervalMs: number = DEFAULT_POLL_INTERVAL_MS,
  maxDurationMs: number = MAX_POLL_DURATION_MS,
): Promise<StepResponse> {
  const start = Date.now();

  while (true) {
    const status = await getStep(sessionId, step);
    if (status.state === 'idle') {
      return status;
    }
    if (Date.now() - start > maxDurationMs) {
      throw new Error(`polling timed out after ${maxDurationMs}ms for step ${step}`);
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}

// Run a step and, if the service accepted it for background execution, poll
// until it settles. Callers always get the final step payload.
export async function runStepToCompletion(
  sessionId: string,
  step: StepName,
  overrides?: Partial<SessionParams>,
  intervalMs: number = DEFAULT_POLL_INTERVAL_MS,
): Promise<StepResponse> {
  const result = await runStep(sessionId, step, overrides);
  if (isAccepted(result)) {
    return pollStepUntilIdle(sessionId, step, intervalMs);
  }
  return result;
}
