// Criterion: resubmission preserves prior artifact panes. Panes are synced
// from manifests, append-only, and point at immutable run-suffixed URLs.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { createSession, getSession, runStep, setBaseUrl } from '../src/api.js';
import { paneKey, syncPanes, type ArtifactPane } from '../src/panes.js';
import type { SessionManifest, StepName } from '../src/types.js';
import { MockService } from './mock-server.js';

const ORDER: StepName[] = ['detect', 'pose', 'control', 'controlnet', 'ip2p'];

function pngBlob(): Blob {
  return new Blob([new Uint8Array([5, 5, 5, 5])], { type: 'image/png' });
}

async function fetchBytes(url: string): Promise<string> {
  const res = await fetch(url);
  expect(res.status).toBe(200);
  return Buffer.from(await res.arrayBuffer()).toString('latin1');
}

async function runAll(id: string): Promise<SessionManifest> {
  for (const step of ORDER) {
    await runStep(id, step);
  }
  return getSession(id);
}

let mock: MockService;

beforeAll(async () => {
  mock = new MockService();
  setBaseUrl(await mock.start());
});

afterAll(async () => {
  await mock.stop();
});

describe('pane accumulation', () => {
  it('creates one pane per completed step on the first pass', async () => {
    const created = await createSession(pngBlob());
    const manifest = await runAll(created.id);
    const panes = syncPanes([], manifest);
    expect(panes.map((pane) => pane.key)).toEqual([
      'detect:r1',
      'pose:r2',
      'control:r3',
      'controlnet:r4',
      'ip2p:r5',
    ]);
    expect(panes[4].urls['final.png']).toContain('final.r5.png');
  });

  it('adds no pane for pending steps', async () => {
    const created = await createSession(pngBlob());
    const manifest = await getSession(created.id);
    expect(syncPanes([], manifest)).toEqual([]);
  });

  it('is idempotent for an unchanged manifest', async () => {
    const created = await createSession(pngBlob());
    const manifest = await runAll(created.id);
    const panes = syncPanes([], manifest);
    const again = syncPanes(panes, manifest);
    expect(again.length).toBe(panes.length);
    expect(again.every((pane, i) => pane === panes[i])).toBe(true);
  });
});

describe('resubmission', () => {
  it('appends new panes and leaves every prior pane untouched', async () => {
    const created = await createSession(pngBlob());
    let manifest = await runAll(created.id);
    const before = syncPanes([], manifest);

    await runStep(created.id, 'controlnet', { seed: 99 });
    manifest = await getSession(created.id);
    const after = syncPanes(before, manifest);

    // the rerun cascades over the previously done ip2p step
    expect(after.map((pane) => pane.key)).toEqual([
      'detect:r1',
      'pose:r2',
      'control:r3',
      'controlnet:r4',
      'ip2p:r5',
      'controlnet:r6',
      'ip2p:r7',
    ]);
    for (let i = 0; i < before.length; i += 1) {
      expect(after[i]).toBe(before[i]);
    }
  });

  it('serves identical bytes from a prior pane URL after a rerun', async () => {
    const created = await createSession(pngBlob());
    let manifest = await runAll(created.id);
    const panes = syncPanes([], manifest);
    const oldUrl = panes[3].urls['control_inpaint.png'];
    const oldBytes = await fetchBytes(oldUrl);

    await runStep(created.id, 'controlnet', { seed: 1234 });
    manifest = await getSession(created.id);
    const after = syncPanes(panes, manifest);

    expect(await fetchBytes(oldUrl)).toBe(oldBytes);
    const newPane = after.find((pane) => pane.key === 'controlnet:r6');
    expect(newPane).toBeDefined();
    const newBytes = await fetchBytes(newPane!.urls['control_inpaint.png']);
    expect(newBytes).not.toBe(oldBytes);
  });

  it('keeps appended panes chronological when a mid-pipeline rerun cascades', async () => {
    const created = await createSession(pngBlob());
    let manifest = await runAll(created.id);
    let panes = syncPanes([], manifest);

    await runStep(created.id, 'control', { template_name: 'fist-back' });
    manifest = await getSession(created.id);
    panes = syncPanes(panes, manifest);

    expect(panes.map((pane) => pane.key)).toEqual([
      'detect:r1',
      'pose:r2',
      'control:r3',
      'controlnet:r4',
      'ip2p:r5',
      'control:r6',
      'controlnet:r7',
      'ip2p:r8',
    ]);
    expect(panes.map((pane) => pane.run)).toEqual([1, 2, 3, 4, 5, 6, 7, 8]);
  });
});

describe('pane keys', () => {
  it('namespaces panes by step and run', () => {
    expect(paneKey('controlnet', 6)).toBe('controlnet:r6');
    const pane: ArtifactPane = { key: paneKey('ip2p', 5), step: 'ip2p', run: 5, urls: {} };
    expect(pane.key).not.toBe(paneKey('ip2p', 7));
  });
});
