// Criterion: steps unlock strictly in order against a mock server. The view
// state is derived from manifests fetched over HTTP and must agree with the
// server's own 409 ordering contract at every stage.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { createSession, getSession, runStep, setBaseUrl } from '../src/api.js';
import { deriveStepViews, nextStep, predecessorsDone } from '../src/state.js';
import type { SessionManifest, StepName } from '../src/types.js';
import { MockService } from './mock-server.js';

const ORDER: StepName[] = ['detect', 'pose', 'control', 'controlnet', 'ip2p'];

function pngBlob(): Blob {
  return new Blob([new Uint8Array([1, 2, 3, 4])], { type: 'image/png' });
}

function enabledFlags(manifest: SessionManifest, running: StepName | null = null): boolean[] {
  return deriveStepViews(manifest, running).map((view) => view.enabled);
}

let mock: MockService;
let base: string;

beforeAll(async () => {
  mock = new MockService();
  base = await mock.start();
  setBaseUrl(base);
});

afterAll(async () => {
  await mock.stop();
});

describe('strict step unlocking', () => {
  it('starts with only the first step enabled', async () => {
    const manifest = await createSession(pngBlob());
    expect(enabledFlags(manifest)).toEqual([true, false, false, false, false]);
    expect(nextStep(manifest)).toBe('detect');
  });

  it('unlocks exactly one more step after each completed run', async () => {
    const created = await createSession(pngBlob());
    for (let done = 0; done < ORDER.length; done += 1) {
      const manifest = await getSession(created.id);
      const expected = ORDER.map((_, i) => i <= done);
      expect(enabledFlags(manifest)).toEqual(expected);
      expect(nextStep(manifest)).toBe(ORDER[done]);
      await runStep(created.id, ORDER[done]);
    }
    const finished = await getSession(created.id);
    expect(enabledFlags(finished)).toEqual([true, true, true, true, true]);
    expect(nextStep(finished)).toBeNull();
  });

  it('agrees with the server: every step the view disables is refused with 409', async () => {
    const created = await createSession(pngBlob());
    await runStep(created.id, 'detect');
    const manifest = await getSession(created.id);
    for (const view of deriveStepViews(manifest)) {
      if (view.enabled) {
        continue;
      }
      const failure = await runStep(created.id, view.step).catch((err: unknown) => err);
      expect(failure).toMatchObject({ status: 409 });
    }
  });

  it('disables every step while one is in flight', async () => {
    const manifest = await createSession(pngBlob());
    expect(enabledFlags(manifest, 'detect')).toEqual([false, false, false, false, false]);
    const views = deriveStepViews(manifest, 'detect');
    expect(views[0].status).toBe('running');
    expect(views[1].status).toBe('pending');
  });
});

describe('derived step views', () => {
  it('exposes run numbers, statuses, and absolute artifact URLs', async () => {
    const created = await createSession(pngBlob());
    await runStep(created.id, 'detect');
    const manifest = await getSession(created.id);
    const [detect, pose] = deriveStepViews(manifest);

    expect(detect.status).toBe('done');
    expect(detect.run).toBe(1);
    expect(detect.artifactUrls['bbox_mask.png']).toBe(
      `${base}/sessions/${created.id}/artifacts/bbox_mask.r1.png`,
    );
    expect(pose.status).toBe('pending');
    expect(pose.artifactUrls).toEqual({});
  });

  it('binds the documented controls to their hosting steps', async () => {
    const manifest = await createSession(pngBlob());
    const views = deriveStepViews(manifest);
    const byStep = Object.fromEntries(views.map((view) => [view.step, view.controls]));
    expect(byStep.detect.map((c) => c.field)).toEqual([
      'include_standard_hands',
      'bbox_expand_ratio',
    ]);
    expect(byStep.pose).toEqual([]);
    expect(byStep.control.map((c) => c.field)).toEqual([
      'template_name',
      'template_expand_ratio',
      'include_undetected_hand',
    ]);
    expect(byStep.controlnet.map((c) => c.field)).toEqual(['seed']);
    expect(byStep.ip2p.map((c) => c.field)).toEqual(['seed']);
  });
});

describe('failure handling (pure manifest)', () => {
  function failedManifest(): SessionManifest {
    return {
      id: 'synthetic',
      params: {
        include_standard_hands: false,
        bbox_expand_ratio: 0,
        template_name: 'opened-palm',
        template_expand_ratio: 0,
        include_undetected_hand: false,
        seed: 0,
      },
      steps: {
        detect: {
          status: 'failed',
          reason: 'NoPersonDetected: no person found',
          run: 1,
          artifacts: {},
          warnings: [],
        },
        pose: { status: 'pending', reason: null, run: null, artifacts: {}, warnings: [] },
        control: { status: 'pending', reason: null, run: null, artifacts: {}, warnings: [] },
        controlnet: { status: 'pending', reason: null, run: null, artifacts: {}, warnings: [] },
        ip2p: { status: 'pending', reason: null, run: null, artifacts: {}, warnings: [] },
      },
      step_order: [...ORDER],
      artifacts: {},
    };
  }

  it('keeps a failed step runnable but blocks its successors', () => {
    const manifest = failedManifest();
    expect(enabledFlags(manifest)).toEqual([true, false, false, false, false]);
    expect(predecessorsDone(manifest, 'pose')).toBe(false);
    expect(nextStep(manifest)).toBe('detect');
  });

  it('surfaces the failure reason on the step view', () => {
    const [detect] = deriveStepViews(failedManifest());
    expect(detect.status).toBe('failed');
    expect(detect.reason).toContain('NoPersonDetected');
  });
});
