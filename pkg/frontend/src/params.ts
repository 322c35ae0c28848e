// Parameter controls shown in the stepper. Every control binds to exactly
// one session parameter; the service owns validation and defaults.

import type { SessionParams, StepName } from './types.js';

export type ControlKind = 'checkbox' | 'slider' | 'select' | 'integer';

export type ParamControl = {
  label: string;
  field: keyof SessionParams;
  kind: ControlKind;
  steps: StepName[];
  min?: number;
  max?: number;
  stepSize?: number;
};

export const PARAM_CONTROLS: ParamControl[] = [
  {
    label: 'Bounding Box Mask Include Standard Hand',
    field: 'include_standard_hands',
    kind: 'checkbox',
    steps: ['detect'],
  },
  {
    label: 'Bounding Box Mask Expand Ratio',
    field: 'bbox_expand_ratio',
    kind: 'slider',
    steps: ['detect'],
    min: 0,
    max: 1,
    stepSize: 0.05,
  },
  {
    label: 'Template',
    field: 'template_name',
    kind: 'select',
    steps: ['control'],
  },
  {
    label: 'Control Image and Mask Expand Ratio (From Wrist)',
    field: 'template_expand_ratio',
    kind: 'slider',
    steps: ['control'],
    min: 0,
    max: 1,
    stepSize: 0.05,
  },
  {
    label: 'Include Undetected Hand',
    field: 'include_undetected_hand',
    kind: 'checkbox',
    steps: ['control'],
  },
  {
    label: 'Seed',
    field: 'seed',
    kind: 'integer',
    steps: ['controlnet', 'ip2p'],
  },
];

export function controlsForStep(step: StepName): ParamControl[] {
  return PARAM_CONTROLS.filter((control) => control.steps.includes(step));
}

// Convert a raw input value (DOM inputs deliver strings, checkboxes deliver
// booleans) to the type the bound session parameter expects.
export function controlValue(
  control: ParamControl,
  raw: string | number | boolean,
): boolean | number | string {
  switch (control.kind) {
    case 'checkbox':
      return typeof raw === 'boolean' ? raw : raw === 'true';
    case 'slider':
      return Number(raw);
    case 'integer':
      return Math.trunc(Number(raw));
    case 'select':
      return String(raw);
  }
}

export function overrideFor(
  control: ParamControl,
  raw: string | number | boolean,
): Partial<SessionParams> {
  return { [control.field]: controlValue(control, raw) } as Partial<SessionParams>;
}
