import { describe, expect, test } from 'vitest';

import { JobPanel } from '../src/jobs';
import { jobSequence, stubClient } from './helpers';

function makePanel(routes: Parameters<typeof stubClient>[0]) {
  const { client, calls } = stubClient(routes);
  const root = document.createElement('div');
  document.body.replaceChildren(root);
  // fast polling so the tests stay quick; production default is 1 s
  const panel = new JobPanel(root, client, 5);
  return { panel, root, calls };
}

function text(root: HTMLElement, testid: string): string {
  return root.querySelector(`[data-testid=${testid}]`)?.textContent ?? '';
}

async function until(fn: () => boolean, ms = 5000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!fn()) {
    if (Date.now() > deadline) throw new Error('condition never held');
    await new Promise((r) => setTimeout(r, 5));
  }
}

describe('launch_optimization job cards', () => {
  test('card reaches done with sparkline and verbatim objective', async () => {
    const history = [120.5, 118.25, 117.125];
    const next = jobSequence('j1', history, 'day,origin,destination,gp_in,gp_out\n0,a,b,0.1,0.2\n');
    const { panel, root } = makePanel([
      {
        method: 'POST',
        path: /\/optimize$/,
        handler: () => ({
          status: 202,
          body: { id: 'j1', state: 'pending', progress: { done: 0, total: 3 }, result: null, error: null },
        }),
      },
      { method: 'GET', path: /\/jobs\/j1$/, handler: () => ({ status: 200, body: next() }) },
    ]);
    await panel.launch({ base_fit: 'base', horizon: 5, population_size: 4, generations: 3, seed: 0 });
    await until(() => text(root, 'job-state') === 'done');
    expect(text(root, 'job-objective')).toBe(String(history[history.length - 1]));
    const points = [...root.querySelectorAll('[data-testid=job-sparkline] [data-point]')].map(
      (el) => Number(el.getAttribute('data-point')),
    );
    expect(points).toEqual(history);
    // best-so-far history always descends on the sparkline
    for (let i = 1; i < points.length; i++) expect(points[i]!).toBeLessThanOrEqual(points[i - 1]!);
    const link = root.querySelector<HTMLAnchorElement>('[data-testid=job-schedule-link]')!;
    expect(link.getAttribute('href')).toContain(encodeURIComponent('0,a,b,0.1,0.2'));
    expect(text(root, 'job-progress')).toBe('3/3');
  });

  test('409 renders a rejected card whose retry relaunches', async () => {
    let attempts = 0;
    const next = jobSequence('j2', [50]);
    const { panel, root } = makePanel([
      {
        method: 'POST',
        path: /\/optimize$/,
        handler: () => {
          attempts += 1;
          if (attempts === 1) {
            return { status: 409, body: { code: 'capacity', message: 'server already runs 2 jobs', details: [] } };
          }
          return {
            status: 202,
            body: { id: 'j2', state: 'pending', progress: { done: 0, total: 1 }, result: null, error: null },
          };
        },
      },
      { method: 'GET', path: /\/jobs\/j2$/, handler: () => ({ status: 200, body: next() }) },
    ]);
    await panel.launch({ base_fit: 'base', horizon: 5, population_size: 4, generations: 1, seed: 0 });
    expect(text(root, 'job-state')).toBe('rejected');
    expect(text(root, 'job-error')).toContain('server already runs 2 jobs');
    expect(attempts).toBe(1); // no silent retry
    root.querySelector<HTMLButtonElement>('[data-testid=job-retry]')!.click();
    await until(() => text(root, 'job-state') === 'done');
    expect(attempts).toBe(2);
  });

  test('failed job shows the error text', async () => {
    const { panel, root } = makePanel([
      {
        method: 'POST',
        path: /\/optimize$/,
        handler: () => ({
          status: 202,
          body: { id: 'j3', state: 'pending', progress: { done: 0, total: 2 }, result: null, error: null },
        }),
      },
      {
        method: 'GET',
        path: /\/jobs\/j3$/,
        handler: () => ({
          status: 200,
          body: { id: 'j3', state: 'failed', progress: { done: 1, total: 2 }, result: null, error: 'aggregates infeasible' },
        }),
      },
    ]);
    await panel.launch({ base_fit: 'base', horizon: 5, population_size: 4, generations: 2, seed: 0 });
    await until(() => text(root, 'job-state') === 'failed');
    expect(text(root, 'job-error')).toBe('aggregates infeasible');
  });

  test('killed server mid-poll transitions the card to failed', async () => {
    let polls = 0;
    const { panel, root } = makePanel([
      {
        method: 'POST',
        path: /\/optimize$/,
        handler: () => ({
          status: 202,
          body: { id: 'j4', state: 'pending', progress: { done: 0, total: 9 }, result: null, error: null },
        }),
      },
      {
        method: 'GET',
        path: /\/jobs\/j4$/,
        handler: () => {
          polls += 1;
          if (polls === 1) {
            return {
              status: 200,
              body: { id: 'j4', state: 'running', progress: { done: 1, total: 9 }, result: null, error: null },
            };
          }
          throw new Error('connection refused');
        },
      },
    ]);
    await panel.launch({ base_fit: 'base', horizon: 5, population_size: 4, generations: 9, seed: 0 });
    await until(() => text(root, 'job-state') === 'failed');
    expect(text(root, 'job-error')).toContain('connection refused');
  });
});
