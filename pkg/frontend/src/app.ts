import { AnnotationQueue } from './annotationQueue';
import { ApiClient } from './api';
import { GUIDELINES_HTML } from './guidelines';
import {
  renderErrorBanner,
  renderMetricsPanel,
  renderParagraphCard,
  renderRelatedPanel,
  renderResults,
} from './render';
import {
  SearchState,
  parseSearchState,
  searchStatesEqual,
  serializeSearchState,
} from './searchState';

const ANNOTATOR_KEY = 'annotator-id';

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function annotatorId(): string {
  let id = localStorage.getItem(ANNOTATOR_KEY);
  if (!id) {
    id = `annotator-${Math.random().toString(36).slice(2, 8)}`;
    localStorage.setItem(ANNOTATOR_KEY, id);
  }
  return id;
}

export class App {
  private state: SearchState;
  private queue: AnnotationQueue | null = null;
  private readonly client: ApiClient;

  constructor(baseUrl = '') {
    this.client = new ApiClient(baseUrl);
    this.state = parseSearchState(window.location.search);
  }

  start(): void {
    requireElement<HTMLElement>('guidelines').innerHTML = GUIDELINES_HTML;
    this.bindSearchForm();
    this.bindResultClicks();
    this.bindAnnotationKeys();
    window.addEventListener('popstate', () => {
      const fromUrl = parseSearchState(window.location.search);
      if (!searchStatesEqual(fromUrl, this.state)) {
        this.state = fromUrl;
        this.syncFormFromState();
        void this.runSearch(false);
      }
    });
    this.syncFormFromState();
    void this.runSearch(false);
    void this.refreshMetrics();
    void this.loadBatch();
  }

  // -- search --------------------------------------------------------------

  private bindSearchForm(): void {
    const form = requireElement<HTMLFormElement>('search-form');
    form.addEventListener('change', () => {
      this.state = {
        session: (requireElement<HTMLInputElement>('session-input').value || null),
        actor: (requireElement<HTMLInputElement>('actor-input').value || null),
        order:
          requireElement<HTMLSelectElement>('order-select').value === 'tension'
            ? 'tension'
            : 'date',
        limit: Number(requireElement<HTMLInputElement>('limit-input').value) || 50,
      };
      void this.runSearch(true);
    });
    form.addEventListener('submit', (event) => event.preventDefault());
  }

  private syncFormFromState(): void {
    requireElement<HTMLInputElement>('session-input').value = this.state.session ?? '';
    requireElement<HTMLInputElement>('actor-input').value = this.state.actor ?? '';
    requireElement<HTMLSelectElement>('order-select').value = this.state.order;
    requireElement<HTMLInputElement>('limit-input').value = String(this.state.limit);
  }

  private async runSearch(pushUrl: boolean): Promise<void> {
    if (pushUrl) {
      history.pushState(null, '', `${window.location.pathname}${serializeSearchState(this.state)}`);
    }
    try {
      const results = await this.client.searchParagraphs(this.state);
      requireElement<HTMLElement>('results').innerHTML = renderResults(results);
      this.clearError();
    } catch (err) {
      this.showError(`Search failed: ${String(err)}`); // previous results stay up
    }
  }

  private bindResultClicks(): void {
    requireElement<HTMLElement>('results').addEventListener('click', (event) => {
      const target = event.target as HTMLElement;
      if (!target.classList.contains('related-btn')) return;
      const id = target.dataset.id;
      if (id) void this.showRelated(id);
    });
  }

  private async showRelated(paragraphId: string): Promise<void> {
    try {
      const related = await this.client.relatedParagraphs(paragraphId, 10);
      requireElement<HTMLElement>('related-panel').innerHTML = renderRelatedPanel(
        paragraphId,
        related,
      );
      this.clearError();
    } catch (err) {
      this.showError(`Related lookup failed: ${String(err)}`);
    }
  }

  // -- annotation ----------------------------------------------------------

  private async loadBatch(): Promise<void> {
    try {
      const batch = await this.client.currentBatch();
      this.queue = new AnnotationQueue(batch, annotatorId(), localStorage);
      this.renderQueue();
    } catch (err) {
      this.showError(`Could not load annotation batch: ${String(err)}`);
    }
  }

  private bindAnnotationKeys(): void {
    document.addEventListener('keydown', (event) => {
      if (!this.queue) return;
      const active = document.activeElement;
      if (active instanceof HTMLInputElement || active instanceof HTMLSelectElement) return;
      if (event.key === '0') this.queue.stageLabel(0);
      else if (event.key === '1') this.queue.stageLabel(1);
      else if (event.key === 's') this.queue.skip();
      else return;
      this.renderQueue();
      if (this.queue.isComplete()) void this.submitBatch();
    });
  }

  private renderQueue(): void {
    const panel = requireElement<HTMLElement>('queue-panel');
    if (!this.queue || this.queue.totalCount === 0) {
      panel.innerHTML = '<p class="empty">No paragraphs awaiting annotation.</p>';
      return;
    }
    const item = this.queue.current();
    const progress = `<p class="progress">round ${this.queue.round} — ${this.queue.stagedCount}/${this.queue.totalCount} labelled</p>`;
    panel.innerHTML = item
      ? `${progress}${renderParagraphCard(item)}<p class="hint"><kbd>1</kbd> tension · <kbd>0</kbd> no tension · <kbd>s</kbd> skip</p>`
      : `${progress}<p>Batch complete, submitting…</p>`;
  }

  private async submitBatch(): Promise<void> {
    if (!this.queue) return;
    try {
      const result = await this.queue.submit(this.client);
      requireElement<HTMLElement>('queue-panel').innerHTML =
        `<p>Submitted ${result.accepted} labels.` +
        `${result.retraining ? ' Retraining started.' : ''}</p>`;
      this.clearError();
      await this.refreshMetrics();
      await this.loadBatch(); // the next sampled batch reflects these labels
    } catch (err) {
      // the draft stays in local storage; retry re-sends the same rows
      this.showError(`Submission failed, will retry: ${String(err)}`);
      setTimeout(() => void this.submitBatch(), 2000);
    }
  }

  // -- metrics ---------------------------------------------------------------

  private async refreshMetrics(): Promise<void> {
    try {
      const metrics = await this.client.currentMetrics();
      requireElement<HTMLElement>('metrics-panel').innerHTML = renderMetricsPanel(metrics);
    } catch (err) {
      this.showError(`Metrics unavailable: ${String(err)}`);
    }
  }

  // -- errors ----------------------------------------------------------------

  private showError(message: string): void {
    requireElement<HTMLElement>('error-banner').innerHTML = renderErrorBanner(message);
  }

  private clearError(): void {
    requireElement<HTMLElement>('error-banner').innerHTML = '';
  }
}

if (typeof document !== 'undefined' && document.getElementById('results')) {
  new App().start();
}
