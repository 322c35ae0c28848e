// Typed fetch client for the restoration service. The base URL defaults to
// same-origin and is overridable for tests and cross-origin deployments.

import type {
  SessionManifest,
  SessionParams,
  StepAccepted,
  StepName,
  StepResponse,
} from './types.js';

let base = '';

export function setBaseUrl(url: string): void {
  base = url.replace(/\/+$/, '');
}

// The service hands out root-relative artifact URLs; prefix them with the
// configured base so they stay fetchable cross-origin.
export function resolveUrl(path: string): string {
  return path.startsWith('/') ? `${base}${path}` : path;
}

export function artifactUrl(sessionId: string, storedName: string): string {
  return `${base}/sessions/${sessionId}/artifacts/${storedName}`;
}

export class ApiError extends Error {
  readonly status: number;
  readonly body: Record<string, unknown>;

  constructor(status: number, body: Record<string, unknown>) {
    super(`${String(body.error ?? 'request failed')} (HTTP ${status})`);
    this.name = 'ApiError';
    this.status = status;
    this.body = body;
  }
}

export function isBusy(err: unknown): boolean {
  return err instanceof ApiError && err.status === 423;
}

export function isExpired(err: unknown): boolean {
  return err instanceof ApiError && err.status === 410;
}

async function errorFrom(res: Response): Promise<ApiError> {
  let body: Record<string, unknown>;
  try {
    body = (await res.json()) as Record<string, unknown>;
  } catch {
    body = { error: res.statusText };
  }
  return new ApiError(res.status, body);
}

async function parseOrThrow<T>(res: Response): Promise<T> {
  if (!res.ok) {
    throw await errorFrom(res);
  }
  return (await res.json()) as T;
}

export async function createSession(
  image: Blob,
  params?: Partial<SessionParams>,
  filename = 'input.png',
): Promise<SessionManifest> {
  const form = new FormData();
  form.append('image', image, filename);
  if (params && Object.keys(params).length > 0) {
    form.append('params', JSON.stringify(params));
  }
  const res = await fetch(`${base}/sessions`, { method: 'POST', body: form });
  return parseOrThrow(res);
}

export async function getSession(id: string): Promise<SessionManifest> {
  const res = await fetch(`${base}/sessions/${id}`);
  return parseOrThrow(res);
}

export async function deleteSession(id: string): Promise<void> {
  const res = await fetch(`${base}/sessions/${id}`, { method: 'DELETE' });
  if (!res.ok) {
    throw await errorFrom(res);
  }
}

export async function runStep(
  id: string,
  step: StepName,
  overrides?: Partial<SessionParams>,
): Promise<StepResponse | StepAccepted> {
  const init: RequestInit = { method: 'POST' };
  if (overrides && Object.keys(overrides).length > 0) {
    init.headers = { 'Content-Type': 'application/json' };
    init.body = JSON.stringify({ params: overrides });
  }
  const res = await fetch(`${base}/sessions/${id}/steps/${step}`, init);
  return parseOrThrow(res);
}

export function isAccepted(result: StepResponse | StepAccepted): result is StepAccepted {
  return 'poll' in result;
}

export async function getStep(id: string, step: StepName): Promise<StepResponse> {
  const res = await fetch(`${base}/sessions/${id}/steps/${step}`);
  return parseOrThrow(res);
}

export async function listTemplates(): Promise<string[]> {
  const res = await fetch(`${base}/templates`);
  const data = await parseOrThrow<{ templates: string[] }>(res);
  return data.templates;
}

export async function fetchJsonArtifact<T>(url: string): Promise<T> {
  const res = await fetch(resolveUrl(url));
  return parseOrThrow(res);
}
