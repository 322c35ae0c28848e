// DOM builders for the stepper layout. Pure display mappings sit at the top
// so they can be unit tested without a browser.

import { overrideFor, type ParamControl } from './params.js';
import type { ArtifactPane } from './panes.js';
import type { StepViewState } from './state.js';
import type { DetectionJson, DetectionReport, SessionParams, StepName } from './types.js';

export const STEP_TITLES: Record<string, string> = {
  detect: 'Step 1: Detect non-standard hands',
  pose: 'Step 2: Body and hand pose',
  control: 'Step 3: Template placement and masks',
  controlnet: 'Step 4: Control-guided inpainting',
  ip2p: 'Step 5: Instruction refinement',
};

export function boxColor(label: DetectionJson['label']): 'red' | 'green' {
  return label === 'NON_STANDARD' ? 'red' : 'green';
}

export type StepPanelHandlers = {
  onRun: (step: StepName, overrides: Partial<SessionParams>) => void;
  templates: string[];
};

export function renderControl(
  control: ParamControl,
  current: string | number | boolean,
  onChange: (control: ParamControl, raw: string | boolean) => void,
  options: { templates?: string[]; disabled?: boolean } = {},
): HTMLElement {
  const wrap = document.createElement('label');
  wrap.className = 'param-control';
  const caption = document.createElement('span');
  caption.textContent = control.label;
  wrap.appendChild(caption);

  let input: HTMLInputElement | HTMLSelectElement;
  if (control.kind === 'select') {
    const select = document.createElement('select');
    for (const name of options.templates ?? [String(current)]) {
      const option = document.createElement('option');
      option.value = name;
      option.textContent = name;
      option.selected = name === current;
      select.appendChild(option);
    }
    select.addEventListener('change', () => onChange(control, select.value));
    input = select;
  } else if (control.kind === 'checkbox') {
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.checked = current === true;
    box.addEventListener('change', () => onChange(control, box.checked));
    input = box;
  } else {
    const field = document.createElement('input');
    field.type = control.kind === 'slider' ? 'range' : 'number';
    if (control.min !== undefined) field.min = String(control.min);
    if (control.max !== undefined) field.max = String(control.max);
    if (control.stepSize !== undefined) field.step = String(control.stepSize);
    field.value = String(current);
    field.addEventListener('change', () => onChange(control, field.value));
    input = field;
  }
  input.disabled = options.disabled ?? false;
  input.dataset.field = control.field;
  wrap.appendChild(input);
  return wrap;
}

export function renderError(message: string, onRetry: (() => void) | null): HTMLElement {
  const box = document.createElement('div');
  box.className = 'error-box';
  box.setAttribute('role', 'alert');
  const text = document.createElement('span');
  text.textContent = message;
  box.appendChild(text);
  if (onRetry) {
    const retry = document.createElement('button');
    retry.textContent = 'Retry';
    retry.addEventListener('click', onRetry);
    box.appendChild(retry);
  }
  return box;
}

export function renderStepPanel(
  view: StepViewState,
  params: SessionParams,
  handlers: StepPanelHandlers,
): HTMLElement {
  const panel = document.createElement('section');
  panel.className = `step-panel status-${view.status}`;
  panel.dataset.step = view.step;

  const heading = document.createElement('h2');
  heading.textContent = STEP_TITLES[view.step] ?? view.step;
  const badge = document.createElement('span');
  badge.className = `status-badge ${view.status}`;
  badge.textContent = view.status;
  heading.appendChild(badge);
  panel.appendChild(heading);

  const overrides: Partial<SessionParams> = {};
  const collect = (control: ParamControl, raw: string | boolean) => {
    Object.assign(overrides, overrideFor(control, raw));
  };
  for (const control of view.controls) {
    panel.appendChild(
      renderControl(control, params[control.field], collect, {
        templates: control.kind === 'select' ? handlers.templates : undefined,
        disabled: !view.enabled,
      }),
    );
  }

  const run = document.createElement('button');
  run.className = 'run-step';
  run.textContent = view.status === 'done' ? 'Resubmit' : 'Run';
  run.disabled = !view.enabled;
  run.addEventListener('click', () => handlers.onRun(view.step, { ...overrides }));
  panel.appendChild(run);

  if (view.reason) {
    panel.appendChild(renderError(view.reason, () => handlers.onRun(view.step, { ...overrides })));
  }
  for (const warning of view.warnings) {
    const note = document.createElement('p');
    note.className = 'warning';
    note.textContent = warning;
    panel.appendChild(note);
  }
  return panel;
}

export function renderDetectionOverlay(report: DetectionReport, imageUrl: string): HTMLElement {
  const [width, height] = report.image_size;
  const wrap = document.createElement('div');
  wrap.className = 'detection-overlay';
  const img = document.createElement('img');
  img.src = imageUrl;
  img.alt = 'input image';
  wrap.appendChild(img);
  for (const det of report.detections) {
    const box = document.createElement('div');
    box.className = 'detection-box';
    box.style.borderColor = boxColor(det.label);
    box.style.left = `${(det.box.x1 / width) * 100}%`;
    box.style.top = `${(det.box.y1 / height) * 100}%`;
    box.style.width = `${((det.box.x2 - det.box.x1) / width) * 100}%`;
    box.style.height = `${((det.box.y2 - det.box.y1) / height) * 100}%`;
    box.title = `${det.label} ${det.confidence.toFixed(2)}`;
    wrap.appendChild(box);
  }
  return wrap;
}

export function renderDetectionList(report: DetectionReport): HTMLElement {
  const list = document.createElement('ul');
  list.className = 'detection-list';
  const summary = document.createElement('li');
  summary.textContent =
    `${report.detections.length} hand(s) detected, ` +
    `${report.targets.length} restoration target(s)`;
  list.appendChild(summary);
  for (const det of report.detections) {
    const item = document.createElement('li');
    item.textContent = `${det.label.toLowerCase().replace('_', '-')}: confidence ${det.confidence.toFixed(2)}`;
    item.style.color = boxColor(det.label);
    list.appendChild(item);
  }
  return list;
}

export function renderPane(pane: ArtifactPane): HTMLElement {
  const section = document.createElement('section');
  section.className = 'artifact-pane';
  section.dataset.pane = pane.key;
  const heading = document.createElement('h3');
  heading.textContent = `${STEP_TITLES[pane.step] ?? pane.step} (run ${pane.run})`;
  section.appendChild(heading);
  for (const [logical, url] of Object.entries(pane.urls)) {
    if (logical.endsWith('.png')) {
      const figure = document.createElement('figure');
      const img = document.createElement('img');
      img.src = url;
      img.alt = logical;
      img.addEventListener('click', () => img.classList.toggle('zoomed'));
      const caption = document.createElement('figcaption');
      caption.textContent = logical;
      figure.append(img, caption);
      section.appendChild(figure);
    } else {
      const link = document.createElement('a');
      link.href = url;
      link.textContent = logical;
      link.target = '_blank';
      section.appendChild(link);
    }
  }
  return section;
}
