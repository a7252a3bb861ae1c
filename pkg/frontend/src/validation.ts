/** Client-side validation mirroring the service's 422 rules exactly:
 * a form state passes here iff the request it produces would be accepted. */

import type { SimulateRequest } from './api';

export interface ScenarioForm {
  mobilityMultiplier: number; // slider 0..3, step 0.1; presets small/medium/large = 1/2/3
  theta: number | null; // 0..0.95 when set
  quarantine: Record<string, number | null>; // per node, 0..1 when set
  horizon: number; // 1..180
  targetNodes: string[]; // subset of known nodes; empty means all
}

export interface FieldError {
  field: string;
  message: string;
}

export const PRESETS = { small: 1.0, medium: 2.0, large: 3.0 } as const;

export function validateScenario(form: ScenarioForm, knownNodes: string[]): FieldError[] {
  const errors: FieldError[] = [];
  if (!Number.isFinite(form.mobilityMultiplier) || form.mobilityMultiplier < 0 || form.mobilityMultiplier > 3) {
    errors.push({ field: 'mobilityMultiplier', message: 'must lie in [0, 3]' });
  }
  if (!Number.isInteger(form.horizon) || form.horizon < 1 || form.horizon > 180) {
    errors.push({ field: 'horizon', message: 'must be an integer in [1, 180]' });
  }
  if (form.theta !== null && (!Number.isFinite(form.theta) || form.theta < 0 || form.theta > 0.95)) {
    errors.push({ field: 'theta', message: 'must lie in [0, 0.95]' });
  }
  for (const [node, value] of Object.entries(form.quarantine)) {
    if (!knownNodes.includes(node)) {
      errors.push({ field: `quarantine.${node}`, message: 'unknown node' });
    } else if (value !== null && (!Number.isFinite(value) || value < 0 || value > 1)) {
      errors.push({ field: `quarantine.${node}`, message: 'must lie in [0, 1]' });
    }
  }
  for (const node of form.targetNodes) {
    if (!knownNodes.includes(node)) {
      errors.push({ field: 'targetNodes', message: `unknown node ${node}` });
    }
  }
  return errors;
}

/** Only called with a valid form; builds the exact request body. */
export function toRequest(form: ScenarioForm, baseFit: string): SimulateRequest {
  const body: SimulateRequest = {
    base_fit: baseFit,
    horizon: form.horizon,
    mobility_multiplier: form.mobilityMultiplier,
  };
  if (form.theta !== null) body.theta = form.theta;
  const quarantine: Record<string, number> = {};
  for (const [node, value] of Object.entries(form.quarantine)) {
    if (value !== null) quarantine[node] = value;
  }
  if (Object.keys(quarantine).length > 0) body.quarantine = quarantine;
  if (form.targetNodes.length > 0) body.target_nodes = form.targetNodes;
  return body;
}

export interface OptimizeForm {
  horizon: number;
  populationSize: number;
  generations: number;
  seed: number;
  mobilityScale: number;
}

export function validateOptimize(form: OptimizeForm): FieldError[] {
  const errors: FieldError[] = [];
  if (!Number.isInteger(form.horizon) || form.horizon < 1 || form.horizon > 180) {
    errors.push({ field: 'horizon', message: 'must be an integer in [1, 180]' });
  }
  if (!Number.isInteger(form.populationSize) || form.populationSize < 2) {
    errors.push({ field: 'populationSize', message: 'must be an integer >= 2' });
  }
  if (!Number.isInteger(form.generations) || form.generations < 1) {
    errors.push({ field: 'generations', message: 'must be an integer >= 1' });
  }
  if (!Number.isInteger(form.seed)) {
    errors.push({ field: 'seed', message: 'must be an integer' });
  }
  if (!Number.isFinite(form.mobilityScale) || form.mobilityScale < 0) {
    errors.push({ field: 'mobilityScale', message: 'must be >= 0' });
  }
  return errors;
}
