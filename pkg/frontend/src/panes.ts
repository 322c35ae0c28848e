// Artifact panes accumulate across runs: every completed (step, run) pair
// gets one pane, and reruns append instead of replacing, so earlier results
// stay visible for comparison. Stored artifact names carry the run suffix
// and the server never rewrites them, so pane URLs are immutable.

import { artifactUrl } from './api.js';
import type { SessionManifest, StepName } from './types.js';

export type ArtifactPane = {
  key: string;
  step: StepName;
  run: number;
  urls: Record<string, string>;
};

export function paneKey(step: string, run: number): string {
  return `${step}:r${run}`;
}

export function syncPanes(
  panes: readonly ArtifactPane[],
  manifest: SessionManifest,
): ArtifactPane[] {
  const known = new Set(panes.map((pane) => pane.key));
  const added: ArtifactPane[] = [];
  for (const step of manifest.step_order) {
    const entry = manifest.steps[step];
    if (entry.status !== 'done' || entry.run === null) {
      continue;
    }
    const key = paneKey(step, entry.run);
    if (known.has(key)) {
      continue;
    }
    added.push({
      key,
      step,
      run: entry.run,
      urls: Object.fromEntries(
        Object.entries(entry.artifacts).map(([logical, stored]) => [
          logical,
          artifactUrl(manifest.id, stored),
        ]),
      ),
    });
  }
  // the run counter is global to the session, so sorting new panes by run
  // keeps the pane column chronological even when a rerun cascades
  added.sort((a, b) => a.run - b.run);
  return [...panes, ...added];
}
