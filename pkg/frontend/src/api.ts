/** Typed client for the epidemic what-if service. */

export interface NodeInfo {
  id: string;
  name: string;
  population: number;
  latest_confirmed: number;
}

export interface SimulateRequest {
  base_fit: string;
  horizon: number;
  mobility_multiplier?: number;
  theta?: number;
  quarantine?: Record<string, number>;
  alpha0_multiplier?: number;
  target_nodes?: string[];
}

export interface SimulateResponse {
  days: number[];
  nodes: string[];
  series: Record<string, { D: number[]; C: number[]; U: number[]; A: number[] }>;
  target_nodes: string[];
  total_confirmed_by_day: number[];
  total_confirmed: number;
  clamp_events: number;
}

export interface ForecastReport {
  node: string;
  dates: string[];
  predicted: number[];
  observed: number[] | null;
  pe: number[] | null;
  mape: number | null;
  rmse: number | null;
}

export interface OptimizeRequest {
  base_fit: string;
  horizon: number;
  population_size: number;
  generations: number;
  seed: number;
  mobility_scale?: number;
  target_nodes?: string[];
}

export interface JobStatus {
  id: string;
  state: 'pending' | 'running' | 'done' | 'failed';
  progress: { done: number; total: number };
  result: {
    best_objective: number;
    fitness_history: number[];
    constraint_residual: number;
    schedule_csv: string;
  } | null;
  error: string | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public details: unknown[] = [],
  ) {
    super(message);
  }
}

async function parseError(res: Response): Promise<ApiError> {
  try {
    const body = await res.json();
    return new ApiError(res.status, body.code ?? 'error', body.message ?? res.statusText, body.details ?? []);
  } catch {
    return new ApiError(res.status, 'error', res.statusText);
  }
}

export class Client {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { 'Content-Type': 'application/json' },
      ...init,
    });
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string; nodes: number; fits: string[] }> {
    return this.request('/health');
  }

  nodes(): Promise<NodeInfo[]> {
    return this.request('/nodes');
  }

  simulate(body: SimulateRequest, signal?: AbortSignal): Promise<SimulateResponse> {
    return this.request('/simulate', { method: 'POST', body: JSON.stringify(body), signal });
  }

  forecast(fit: string, horizon: number): Promise<{ reports: Record<string, ForecastReport> }> {
    return this.request('/forecast', { method: 'POST', body: JSON.stringify({ fit, horizon }) });
  }

  optimize(body: OptimizeRequest): Promise<JobStatus> {
    return this.request('/optimize', { method: 'POST', body: JSON.stringify(body) });
  }

  job(id: string): Promise<JobStatus> {
    return this.request(`/jobs/${id}`);
  }
}
