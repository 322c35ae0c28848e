// Step view state derived from the session manifest. The manifest is the
// single source of truth, so a page refresh reconstructs the same view.

import { artifactUrl } from './api.js';
import { controlsForStep, type ParamControl } from './params.js';
import type { SessionManifest, StepName } from './types.js';

export type StepViewStatus = 'pending' | 'running' | 'done' | 'failed';

export type StepViewState = {
  step: StepName;
  status: StepViewStatus;
  enabled: boolean;
  artifactUrls: Record<string, string>;
  controls: ParamControl[];
  warnings: string[];
  reason: string | null;
  run: number | null;
};

export function predecessorsDone(manifest: SessionManifest, step: StepName): boolean {
  const order = manifest.step_order;
  for (const previous of order.slice(0, order.indexOf(step))) {
    if (manifest.steps[previous].status !== 'done') {
      return false;
    }
  }
  return true;
}

// A step's controls are live only when every predecessor is done (the server
// answers 409 otherwise) and no step of the session is in flight (the server
// answers 423 while its lock is held).
export function deriveStepViews(
  manifest: SessionManifest,
  runningStep: StepName | null = null,
): StepViewState[] {
  return manifest.step_order.map((step) => {
    const entry = manifest.steps[step];
    const urls = Object.fromEntries(
      Object.entries(entry.artifacts).map(([logical, stored]) => [
        logical,
        artifactUrl(manifest.id, stored),
      ]),
    );
    return {
      step,
      status: step === runningStep ? 'running' : entry.status,
      enabled: runningStep === null && predecessorsDone(manifest, step),
      artifactUrls: urls,
      controls: controlsForStep(step),
      warnings: [...entry.warnings],
      reason: entry.reason,
      run: entry.run,
    };
  });
}

// First step that has not completed; null once the whole session is done.
export function nextStep(manifest: SessionManifest): StepName | null {
  for (const step of manifest.step_order) {
    if (manifest.steps[step].status !== 'done') {
      return step;
    }
  }
  return null;
}
