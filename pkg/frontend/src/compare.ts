/** Comparison view: overlay the selected scenarios' target-total curves and
 * list their headline totals, sorted ascending. */

import { color, lineChart, Series } from './chart';
import { SavedScenario, ScenarioStore } from './state';

export class ComparePanel {
  constructor(
    private root: HTMLElement,
    private store: ScenarioStore,
  ) {
    store.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    const selected = this.store.selected();
    this.renderPicker();
    const chartBox = this.ensure('compare-chart', 'div');
    const table = this.ensure('compare-table', 'table');
    const empty = this.ensure('compare-empty', 'p');
    if (selected.length === 0) {
      chartBox.replaceChildren();
      table.replaceChildren();
      empty.hidden = false;
      empty.textContent = 'no scenarios selected';
      return;
    }
    empty.hidden = true;

    const series: Series[] = selected.map((s, i) => ({
      label: s.label,
      values: s.response.total_confirmed_by_day,
      color: color(i),
    }));
    chartBox.replaceChildren(lineChart(series));

    const legend = this.ensure('compare-legend', 'ul');
    legend.replaceChildren(
      ...series.map((s) => {
        const li = document.createElement('li');
        li.textContent = s.label;
        li.style.color = s.color;
        return li;
      }),
    );

    const rows = [...selected].sort(
      (a, b) => a.response.total_confirmed - b.response.total_confirmed,
    );
    table.innerHTML = '<tr><th>scenario</th><th>total confirmed</th></tr>';
    for (const scenario of rows) {
      const tr = document.createElement('tr');
      tr.dataset.testid = 'compare-row';
      tr.innerHTML = `<td>${scenario.label}</td>` +
        `<td data-testid="compare-total">${scenario.response.total_confirmed}</td>`;
      table.appendChild(tr);
    }
  }

  private renderPicker(): void {
    const picker = this.ensure('compare-picker', 'div');
    picker.replaceChildren(
      ...this.store.all().map((scenario: SavedScenario) => {
        const label = document.createElement('label');
        const box = document.createElement('input');
        box.type = 'checkbox';
        box.checked = this.store.isSelected(scenario.id);
        box.dataset.testid = `compare-select-${scenario.id}`;
        box.addEventListener('change', () => this.store.toggle(scenario.id));
        label.append(box, scenario.label);
        return label;
      }),
    );
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
}
