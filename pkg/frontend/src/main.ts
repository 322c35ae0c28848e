// Application wiring: one restoration session per tab, all view state
// derived from the server manifest after every action.

import {
  ApiError,
  artifactUrl,
  createSession,
  fetchJsonArtifact,
  getSession,
  isBusy,
  listTemplates,
  setBaseUrl,
} from './api.js';
import { syncPanes, type ArtifactPane } from './panes.js';
import { runStepToCompletion } from './polling.js';
import { deriveStepViews } from './state.js';
import {
  renderDetectionList,
  renderDetectionOverlay,
  renderError,
  renderPane,
  renderStepPanel,
} from './views.js';
import type { DetectionReport, SessionManifest, SessionParams, StepName } from './types.js';

type AppState = {
  manifest: SessionManifest | null;
  panes: ArtifactPane[];
  runningStep: StepName | null;
  templates: string[];
  detections: DetectionReport | null;
  error: string | null;
};

const state: AppState = {
  manifest: null,
  panes: [],
  runningStep: null,
  templates: [],
  detections: null,
  error: null,
};

const root = document.getElementById('app');

async function refresh(): Promise<void> {
  if (!state.manifest) {
    return;
  }
  try {
    const manifest = await getSession(state.manifest.id);
    state.manifest = manifest;
    state.panes = syncPanes(state.panes, manifest);
    const stored = manifest.steps.detect?.artifacts['detections.json'];
    state.detections = stored
      ? await fetchJsonArtifact<DetectionReport>(artifactUrl(manifest.id, stored))
      : null;
  } catch (err) {
    state.error = err instanceof ApiError ? err.message : String(err);
  }
  render();
}

async function onRun(step: StepName, overrides: Partial<SessionParams>): Promise<void> {
  if (!state.manifest || state.runningStep !== null) {
    return;
  }
  state.runningStep = step;
  state.error = null;
  render();
  try {
    await runStepToCompletion(state.manifest.id, step, overrides);
  } catch (err) {
    if (isBusy(err)) {
      state.error = 'The session is busy running another step; wait and retry.';
    } else if (err instanceof ApiError) {
      state.error = err.message;
    } else {
      state.error = String(err);
    }
  } finally {
    state.runningStep = null;
  }
  await refresh();
}

async function onUpload(file: File): Promise<void> {
  state.error = null;
  try {
    state.templates = await listTemplates();
    state.manifest = await createSession(file);
  } catch (err) {
    state.error = err instanceof ApiError ? err.message : String(err);
    render();
    return;
  }
  await refresh();
}

function renderUploadForm(): HTMLElement {
  const form = document.createElement('form');
  form.className = 'upload-form';
  const input = document.createElement('input');
  input.type = 'file';
  input.accept = 'image/*';
  input.name = 'image';
  const submit = document.createElement('button');
  submit.type = 'submit';
  submit.textContent = 'Start restoration session';
  form.append(input, submit);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const file = input.files?.[0];
    if (file) {
      void onUpload(file);
    }
  });
  return form;
}

function render(): void {
  if (!root) {
    return;
  }
  root.replaceChildren();

  if (!state.manifest) {
    root.appendChild(renderUploadForm());
    if (state.error) {
      root.appendChild(renderError(state.error, null));
    }
    return;
  }
  const manifest = state.manifest;

  if (state.runningStep) {
    const banner = document.createElement('div');
    banner.className = 'busy-banner';
    banner.textContent = `Running ${state.runningStep}...`;
    root.appendChild(banner);
  }
  if (state.error) {
    root.appendChild(renderError(state.error, null));
  }

  const stepper = document.createElement('div');
  stepper.className = 'stepper';
  for (const view of deriveStepViews(manifest, state.runningStep)) {
    const panel = renderStepPanel(view, manifest.params, {
      onRun: (step, overrides) => {
        void onRun(step, overrides);
      },
      templates: state.templates,
    });
    if (view.step === 'detect' && state.detections) {
      panel.appendChild(
        renderDetectionOverlay(state.detections, artifactUrl(manifest.id, 'input.png')),
      );
      panel.appendChild(renderDetectionList(state.detections));
    }
    stepper.appendChild(panel);
  }
  root.appendChild(stepper);

  const panesHost = document.createElement('div');
  panesHost.className = 'panes';
  for (const pane of state.panes) {
    panesHost.appendChild(renderPane(pane));
  }
  root.appendChild(panesHost);
}

const apiOrigin = new URLSearchParams(window.location.search).get('api');
if (apiOrigin) {
  setBaseUrl(apiOrigin);
}

render();
