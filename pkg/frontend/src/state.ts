/** Saved-scenario store for the comparison view. Saves are immutable:
 * re-running a scenario appends a new entry rather than mutating. */

import type { SimulateRequest, SimulateResponse } from './api';

export interface SavedScenario {
  id: number;
  label: string;
  request: SimulateRequest;
  response: SimulateResponse;
}

export class ScenarioStore {
  private scenarios: SavedScenario[] = [];
  private selection = new Set<number>();
  private listeners: (() => void)[] = [];
  private nextId = 1;

  save(label: string, request: SimulateRequest, response: SimulateResponse): SavedScenario {
    const entry: SavedScenario = Object.freeze({ id: this.nextId++, label, request, response });
    this.scenarios = [...this.scenarios, entry];
    this.selection.add(entry.id);
    this.emit();
    return entry;
  }

  all(): readonly SavedScenario[] {
    return this.scenarios;
  }

  selected(): SavedScenario[] {
    return this.scenarios.filter((s) => this.selection.has(s.id));
  }

  toggle(id: number): void {
    if (this.selection.has(id)) this.selection.delete(id);
    else this.selection.add(id);
    this.emit();
  }

  isSelected(id: number): boolean {
    return this.selection.has(id);
  }

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }
}

/** Daily new cases from a cumulative series by first differences. This is the
 * single piece of arithmetic the client performs on service numbers. */
export function dailyNew(cumulative: number[]): number[] {
  return cumulative.map((v, i) => (i === 0 ? 0 : v - cumulative[i - 1]!));
}
