// Wire types for the restoration service HTTP API.

export type StepName = 'detect' | 'pose' | 'control' | 'controlnet' | 'ip2p';

export type StepStatusValue = 'pending' | 'done' | 'failed';

export type SessionParams = {
  include_standard_hands: boolean;
  bbox_expand_ratio: number;
  template_name: string;
  template_expand_ratio: number;
  include_undetected_hand: boolean;
  seed: number;
};

// Step entries in the session manifest map logical artifact names to stored
// run-suffixed file names; the step endpoints map them to fetchable URLs.
export type ManifestStep = {
  status: StepStatusValue;
  reason: string | null;
  run: number | null;
  artifacts: Record<string, string>;
  warnings: string[];
};

export type SessionManifest = {
  id: string;
  params: SessionParams;
  steps: Record<string, ManifestStep>;
  step_order: StepName[];
  artifacts: Record<string, string>;
};

export type StepResponse = {
  step: StepName;
  state: 'running' | 'idle';
  status: StepStatusValue;
  reason: string | null;
  run: number | null;
  warnings: string[];
  artifacts: Record<string, string>;
  error?: string;
  message?: string;
  recoverable?: boolean;
};

// Returned with a 202 when the service runs steps asynchronously.
export type StepAccepted = {
  step: StepName;
  state: 'running';
  poll: string;
};

export type BoxJson = {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
};

export type DetectionJson = {
  box: BoxJson;
  label: 'STANDARD' | 'NON_STANDARD';
  confidence: number;
};

export type TargetJson = {
  index: number;
  source: string;
  label: string;
  confidence: number | null;
  box: BoxJson;
};

export type DetectionReport = {
  image_size: [number, number];
  detections: DetectionJson[];
  targets: TargetJson[];
};
