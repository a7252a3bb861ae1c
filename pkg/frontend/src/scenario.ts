/** Scenario form wiring: validate, submit with latest-wins cancellation,
 * render the response chart and headline, and save for comparison. */

import { ApiError, Client, NodeInfo, SimulateResponse } from './api';
import { color, lineChart, Series } from './chart';
import { dailyNew, ScenarioStore } from './state';
import { PRESETS, ScenarioForm, toRequest, validateScenario } from './validation';

export type Compartment = 'D' | 'C' | 'U' | 'A';

export class ScenarioPanel {
  form: ScenarioForm;
  compartment: Compartment = 'D';
  showDailyNew = false;
  private inflight: AbortController | null = null;
  private lastResponse: SimulateResponse | null = null;

  constructor(
    private root: HTMLElement,
    private client: Client,
    private store: ScenarioStore,
    private nodes: NodeInfo[],
    private baseFit: string,
  ) {
    this.form = {
      mobilityMultiplier: 1.0,
      theta: null,
      quarantine: Object.fromEntries(nodes.map((n) => [n.id, null])),
      horizon: 30,
      targetNodes: [],
    };
    this.renderForm();
  }

  private nodeIds(): string[] {
    return this.nodes.map((n) => n.id);
  }

  valid(): boolean {
    return validateScenario(this.form, this.nodeIds()).length === 0;
  }

  applyPreset(name: keyof typeof PRESETS): void {
    this.form.mobilityMultiplier = PRESETS[name];
    this.renderForm();
  }

  private renderForm(): void {
    let panel = this.root.querySelector<HTMLElement>('[data-testid=scenario-form]');
    if (!panel) {
      panel = document.createElement('form');
      panel.dataset.testid = 'scenario-form';
      panel.addEventListener('submit', (e) => {
        e.preventDefault();
        void this.run();
      });
      this.root.appendChild(panel);
    }
    panel.innerHTML = `
      <label>mobility multiplier
        <input data-testid="mobility" type="range" min="0" max="3" step="0.1"
               value="${this.form.mobilityMultiplier}">
        <span data-testid="mobility-value">${this.form.mobilityMultiplier.toFixed(1)}</span>
      </label>
      <span class="presets">
        <button type="button" data-testid="preset-small">Small</button>
        <button type="button" data-testid="preset-medium">Medium</button>
        <button type="button" data-testid="preset-large">Large</button>
      </span>
      <label>asymptomatic share (theta)
        <input data-testid="theta" type="number" min="0" max="0.95" step="0.01"
               value="${this.form.theta ?? ''}" placeholder="fit value">
      </label>
      <label>horizon (days)
        <input data-testid="horizon" type="number" min="1" max="180" step="1"
               value="${this.form.horizon}">
      </label>
      <fieldset data-testid="quarantine-overrides">
        <legend>quarantine overrides</legend>
        ${this.nodes
          .map(
            (n) => `<label>${n.name}
              <input data-testid="quarantine-${n.id}" data-node="${n.id}" type="number"
                     min="0" max="1" step="0.05" value="${this.form.quarantine[n.id] ?? ''}"
                     placeholder="fit value"></label>`,
          )
          .join('')}
      </fieldset>
      <fieldset data-testid="target-nodes">
        <legend>target nodes (none = all)</legend>
        ${this.nodes
          .map(
            (n) => `<label>${n.name}
              <input data-testid="target-${n.id}" data-node="${n.id}" type="checkbox"
                     ${this.form.targetNodes.includes(n.id) ? 'checked' : ''}></label>`,
          )
          .join('')}
      </fieldset>
      <div data-testid="form-errors" class="errors"></div>
      <button data-testid="run-scenario" type="submit">Run scenario</button>
    `;
    panel.querySelector<HTMLInputElement>('[data-testid=mobility]')!.addEventListener('input', (e) => {
      this.form.mobilityMultiplier = Number((e.target as HTMLInputElement).value);
      panel!.querySelector('[data-testid=mobility-value]')!.textContent =
        this.form.mobilityMultiplier.toFixed(1);
      this.refreshValidity();
    });
    panel.querySelector<HTMLInputElement>('[data-testid=theta]')!.addEventListener('input', (e) => {
      const raw = (e.target as HTMLInputElement).value;
      this.form.theta = raw === '' ? null : Number(raw);
      this.refreshValidity();
    });
    panel.querySelector<HTMLInputElement>('[data-testid=horizon]')!.addEventListener('input', (e) => {
      this.form.horizon = Number((e.target as HTMLInputElement).value);
      this.refreshValidity();
    });
    for (const input of panel.querySelectorAll<HTMLInputElement>('[data-testid^=quarantine-]')) {
      input.addEventListener('input', () => {
        this.form.quarantine[input.dataset.node!] = input.value === '' ? null : Number(input.value);
        this.refreshValidity();
      });
    }
    for (const input of panel.querySelectorAll<HTMLInputElement>('[data-testid^=target-]')) {
      input.addEventListener('change', () => {
        const id = input.dataset.node!;
        this.form.targetNodes = input.checked
          ? [...this.form.targetNodes, id]
          : this.form.targetNodes.filter((t) => t !== id);
        this.refreshValidity();
      });
    }
    for (const name of ['small', 'medium', 'large'] as const) {
      panel.querySelector(`[data-testid=preset-${name}]`)!.addEventListener('click', () => {
        this.applyPreset(name);
        this.refreshValidity();
      });
    }
    this.refreshValidity();
  }

  refreshValidity(): void {
    const errors = validateScenario(this.form, this.nodeIds());
    const box = this.root.querySelector<HTMLElement>('[data-testid=form-errors]')!;
    box.textContent = errors.map((e) => `${e.field}: ${e.message}`).join('; ');
    this.root.querySelector<HTMLButtonElement>('[data-testid=run-scenario]')!.disabled =
      errors.length > 0;
  }

  /** Submit the current form; an older in-flight request is aborted. */
  async run(label?: string): Promise<SimulateResponse | null> {
    const errors = validateScenario(this.form, this.nodeIds());
    if (errors.length > 0) return null; // submit is disabled; belt and braces
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const request = toRequest(this.form, this.baseFit);
    try {
      const response = await this.client.simulate(request, controller.signal);
      if (controller !== this.inflight) return null; // superseded
      this.lastResponse = response;
      this.renderResult(response);
      this.store.save(label ?? `scenario ${this.store.all().length + 1}`, request, response);
      return response;
    } catch (err) {
      if ((err as Error).name === 'AbortError') return null;
      this.renderError(err as Error);
      return null;
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  private renderError(err: Error): void {
    const banner = this.ensure('scenario-error', 'div');
    const detail = err instanceof ApiError ? `${err.code}: ${err.message}` : err.message;
    banner.textContent = detail;
    banner.hidden = false;
  }

  toggleCompartment(c: Compartment): void {
    this.compartment = c;
    if (this.lastResponse) this.renderResult(this.lastResponse);
  }

  toggleDailyNew(on: boolean): void {
    this.showDailyNew = on;
    if (this.lastResponse) this.renderResult(this.lastResponse);
  }

  private ensure(testid: string, tag: string): HTMLElement {
    let el = this.root.querySelector<HTMLElement>(`[data-testid=${testid}]`);
    if (!el) {
      el = document.createElement(tag);
      el.dataset.testid = testid;
      this.root.appendChild(el);
    }
    return el;
  }

  private renderResult(response: SimulateResponse): void {
    this.ensure('scenario-error', 'div').hidden = true;
    const headline = this.ensure('headline-total', 'div');
    headline.textContent = String(response.total_confirmed);

    const series: Series[] = response.nodes.map((node, i) => {
      const values = response.series[node]![this.compartment];
      return {
        label: node,
        values: this.showDailyNew ? dailyNew(values) : values,
        color: color(i),
      };
    });
    const chartBox = this.ensure('scenario-chart', 'div');
    chartBox.replaceChildren(lineChart(series));
    const legend = this.ensure('scenario-legend', 'ul');
    legend.replaceChildren(
      ...series.map((s) => {
        const li = document.createElement('li');
        li.textContent = s.label;
        li.style.color = s.color;
        return li;
      }),
    );
  }
}
