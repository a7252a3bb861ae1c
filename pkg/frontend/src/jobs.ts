/** Optimization job cards: launch, poll at 1s with backoff, render progress,
 * and expose the finished schedule as a download. A 409 renders a rejected
 * card with a retry button; nothing retries silently. */

import { ApiError, Client, JobStatus, OptimizeRequest } from './api';
import { sparkline } from './chart';

const POLL_START_MS = 1000;
const POLL_MAX_MS = 8000;

export class JobPanel {
  constructor(
    private root: HTMLElement,
    private client: Client,
    private pollStartMs = POLL_START_MS,
  ) {}

  async launch(request: OptimizeRequest): Promise<HTMLElement> {
    const card = document.createElement('div');
    card.className = 'job-card';
    card.dataset.testid = 'job-card';
    this.root.appendChild(card);
    try {
      const accepted = await this.client.optimize(request);
      card.dataset.jobId = accepted.id;
      this.renderStatus(card, accepted);
      void this.poll(card, accepted.id);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.renderRejected(card, request, err);
      } else {
        this.renderFailure(card, (err as Error).message);
      }
    }
    return card;
  }

  private async poll(card: HTMLElement, jobId: string): Promise<void> {
    let interval = this.pollStartMs;
    for (;;) {
      await new Promise((resolve) => setTimeout(resolve, interval));
      interval = Math.min(interval * 1.5, POLL_MAX_MS);
      let status: JobStatus;
      try {
        status = await this.client.job(jobId);
      } catch (err) {
        this.renderFailure(card, (err as Error).message);
        return;
      }
      this.renderStatus(card, status);
      if (status.state === 'done' || status.state === 'failed') return;
    }
  }

  private renderStatus(card: HTMLElement, status: JobStatus): void {
    card.innerHTML = `
      <span data-testid="job-state">${status.state}</span>
      <span data-testid="job-progress">${status.progress.done}/${status.progress.total}</span>
    `;
    if (status.state === 'done' && status.result) {
      const objective = document.createElement('span');
      objective.dataset.testid = 'job-objective';
      objective.textContent = String(status.result.best_objective);
      card.appendChild(objective);

      const spark = document.createElement('span');
      spark.dataset.testid = 'job-sparkline';
      spark.appendChild(sparkline(status.result.fitness_history));
      card.appendChild(spark);

      const link = document.createElement('a');
      link.dataset.testid = 'job-schedule-link';
      link.download = `schedule-${status.id}.csv`;
      link.href = `data:text/csv;charset=utf-8,${encodeURIComponent(status.result.schedule_csv)}`;
      link.textContent = 'download schedule';
      card.appendChild(link);
    }
    if (status.state === 'failed') {
      const error = document.createElement('span');
      error.dataset.testid = 'job-error';
      error.textContent = status.error ?? 'failed';
      card.appendChild(error);
    }
  }

  private renderRejected(card: HTMLElement, request: OptimizeRequest, err: ApiError): void {
    card.innerHTML = `
      <span data-testid="job-state">rejected</span>
      <span data-testid="job-error">${err.message}</span>
    `;
    const retry = document.createElement('button');
    retry.dataset.testid = 'job-retry';
    retry.textContent = 'retry';
    retry.addEventListener('click', () => {
      card.remove();
      void this.launch(request);
    });
    card.appendChild(retry);
  }

  private renderFailure(card: HTMLElement, message: string): void {
    card.innerHTML = `
      <span data-testid="job-state">failed</span>
      <span data-testid="job-error">${message}</span>
    `;
  }
}
