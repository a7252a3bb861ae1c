import { Client } from './api';
import { ComparePanel } from './compare';
import { JobPanel } from './jobs';
import { ScenarioPanel } from './scenario';
import { ScenarioStore } from './state';
import { validateOptimize } from './validation';

const BASE_URL = import.meta.env?.VITE_API_URL ?? 'http://127.0.0.1:8080';

export async function bootstrap(root: HTMLElement, client: Client): Promise<{
  scenario: ScenarioPanel;
  jobs: JobPanel;
  compare: ComparePanel;
  store: ScenarioStore;
}> {
  const health = await client.health();
  const fitId = health.fits[0];
  if (!fitId) throw new Error('service has no fit loaded');
  const nodes = await client.nodes();

  root.innerHTML = `
    <h1>epidemic what-if explorer</h1>
    <section data-testid="scenario-section"><h2>scenario</h2></section>
    <section data-testid="jobs-section">
      <h2>migration optimization</h2>
      <form data-testid="optimize-form">
        <label>horizon <input data-testid="opt-horizon" type="number" value="14" min="1" max="180"></label>
        <label>population <input data-testid="opt-population" type="number" value="30" min="2"></label>
        <label>generations <input data-testid="opt-generations" type="number" value="10" min="1"></label>
        <label>seed <input data-testid="opt-seed" type="number" value="0"></label>
        <label>scale <input data-testid="opt-scale" type="number" value="1" min="0" step="0.5"></label>
        <button data-testid="launch-job" type="submit">Launch</button>
      </form>
      <div data-testid="job-cards"></div>
    </section>
    <section data-testid="compare-section"><h2>compare scenarios</h2></section>
  `;

  const store = new ScenarioStore();
  const scenario = new ScenarioPanel(
    root.querySelector('[data-testid=scenario-section]')!,
    client,
    store,
    nodes,
    fitId,
  );
  const jobs = new JobPanel(root.querySelector('[data-testid=job-cards]')!, client);
  const compare = new ComparePanel(root.querySelector('[data-testid=compare-section]')!, store);

  root.querySelector('[data-testid=optimize-form]')!.addEventListener('submit', (e) => {
    e.preventDefault();
    const read = (id: string) =>
      Number(root.querySelector<HTMLInputElement>(`[data-testid=${id}]`)!.value);
    const form = {
      horizon: read('opt-horizon'),
      populationSize: read('opt-population'),
      generations: read('opt-generations'),
      seed: read('opt-seed'),
      mobilityScale: read('opt-scale'),
    };
    if (validateOptimize(form).length > 0) return;
    void jobs.launch({
      base_fit: fitId,
      horizon: form.horizon,
      population_size: form.populationSize,
      generations: form.generations,
      seed: form.seed,
      mobility_scale: form.mobilityScale,
    });
  });

  return { scenario, jobs, compare, store };
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  void bootstrap(document.getElementById('app')!, new Client(BASE_URL));
}
