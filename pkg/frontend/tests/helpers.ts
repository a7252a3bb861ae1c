import { Client, JobStatus, SimulateResponse } from '../src/api';

export function canned(nodes: string[], days: number, scale = 1): SimulateResponse {
  const range = Array.from({ length: days + 1 }, (_, i) => i);
  const series = Object.fromEntries(
    nodes.map((node, k) => [
      node,
      {
        D: range.map((d) => 100 * (k + 1) + scale * 7 * d + 0.125),
        C: range.map((d) => 40 * (k + 1) + scale * 2 * d),
        U: range.map((d) => 10 * (k + 1) + scale * d),
        A: range.map((d) => 3 * (k + 1) + 0.5 * scale * d),
      },
    ]),
  );
  const totalByDay = range.map((d) =>
    nodes.reduce((acc, node) => acc + series[node]!.D[d]!, 0),
  );
  return {
    days: range,
    nodes,
    series,
    target_nodes: nodes,
    total_confirmed_by_day: totalByDay,
    total_confirmed: totalByDay[totalByDay.length - 1]!,
    clamp_events: 0,
  };
}

interface Route {
  method: string;
  path: RegExp;
  handler: (body: unknown, url: string) => { status: number; body: unknown };
}

/** fetch stub with recorded calls; routes are matched in order. */
export function stubFetch(routes: Route[]) {
  const calls: { method: string; url: string; body: unknown }[] = [];
  const impl: typeof fetch = async (input, init) => {
    const url = String(input);
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ method, url, body });
    if (init?.signal?.aborted) {
      throw Object.assign(new Error('aborted'), { name: 'AbortError' });
    }
    for (const route of routes) {
      if (route.method === method && route.path.test(url)) {
        const out = route.handler(body, url);
        return new Response(JSON.stringify(out.body), {
          status: out.status,
          headers: { 'Content-Type': 'application/json' },
        });
      }
    }
    return new Response(JSON.stringify({ code: 'not_found', message: 'no route', details: [] }), {
      status: 404,
    });
  };
  return { impl, calls };
}

export function stubClient(routes: Route[]) {
  const { impl, calls } = stubFetch(routes);
  return { client: new Client('http://stub', impl), calls };
}

export function jobSequence(id: string, history: number[], scheduleCsv = 'day,origin,destination,gp_in,gp_out\n') {
  const total = history.length;
  const states: JobStatus[] = [
    { id, state: 'pending', progress: { done: 0, total }, result: null, error: null },
    { id, state: 'running', progress: { done: 1, total }, result: null, error: null },
    {
      id,
      state: 'done',
      progress: { done: total, total },
      result: {
        best_objective: history[history.length - 1]!,
        fitness_history: history,
        constraint_residual: 1e-13,
        schedule_csv: scheduleCsv,
      },
      error: null,
    },
  ];
  let cursor = 0;
  return () => states[Math.min(cursor++, states.length - 1)]!;
}
