import { ApiClient } from './api';
import { AnnotationBatch, AnnotationResult, LabelRow, ParagraphView } from './types';

/** Minimal slice of the Storage interface, so tests can inject a fake. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

interface Draft {
  round: number;
  staged: Record<string, 0 | 1>;
  skipped: string[];
}

const DRAFT_KEY = 'annotation-draft';

/**
 * Client-side state of one active-learning round.
 *
 * Labels are staged locally (and persisted, so a reload mid-batch restores
 * them) and submitted in a single POST once every pending paragraph has a
 * value. Submission sends exactly the staged rows; the service treats
 * re-submission of an already-closed round as idempotent.
 */
export class AnnotationQueue {
  readonly round: number;
  readonly batchSize: number;
  private readonly items: ParagraphView[];
  private staged = new Map<string, 0 | 1>();
  private skipped: string[] = [];
  private cursor = 0;

  constructor(
    batch: AnnotationBatch,
    private readonly annotatorId: string,
    private readonly store: KeyValueStore,
  ) {
    this.round = batch.round;
    this.batchSize = batch.batch_size;
    this.items = [...batch.pending];
    this.restoreDraft();
  }

  get stagedCount(): number {
    return this.staged.size;
  }

  get totalCount(): number {
    return this.items.length;
  }

  /** The paragraph currently awaiting a decision, or null when done. */
  current(): ParagraphView | null {
    for (let i = 0; i < this.items.length; i++) {
      const item = this.items[(this.cursor + i) % this.items.length];
      if (item && !this.staged.has(item.id)) return item;
    }
    return null;
  }

  isComplete(): boolean {
    return this.items.length > 0 && this.staged.size === this.items.length;
  }

  stageLabel(value: 0 | 1): void {
    const item = this.current();
    if (!item) return;
    this.staged.set(item.id, value);
    this.cursor = this.items.findIndex((p) => p.id === item.id) + 1;
    this.saveDraft();
  }

  /** Push the current item to the back of the queue for a second look. */
  skip(): void {
    const item = this.current();
    if (!item) return;
    if (!this.skipped.includes(item.id)) this.skipped.push(item.id);
    this.cursor = this.items.findIndex((p) => p.id === item.id) + 1;
    this.saveDraft();
  }

  /** Undo the most recent staged label so it can be revised. */
  unstage(paragraphId: string): void {
    this.staged.delete(paragraphId);
    this.saveDraft();
  }

  labelRows(): LabelRow[] {
    return this.items
      .filter((p) => this.staged.has(p.id))
      .map((p) => ({
        paragraph_id: p.id,
        annotator_id: this.annotatorId,
        value: this.staged.get(p.id) as 0 | 1,
      }));
  }

  /** Submit the completed batch. Safe to call again after a failure: the
   * same rows are sent and the service deduplicates. */
  async submit(client: ApiClient): Promise<AnnotationResult> {
    if (!this.isComplete()) {
      throw new Error(`batch incomplete: ${this.staged.size}/${this.items.length} labelled`);
    }
    const result = await client.submitAnnotations(this.labelRows());
    this.store.removeItem(this.draftKey());
    return result;
  }

  private draftKey(): string {
    return `${DRAFT_KEY}:${this.annotatorId}:${this.round}`;
  }

  private saveDraft(): void {
    const draft: Draft = {
      round: this.round,
      staged: Object.fromEntries(this.staged) as Record<string, 0 | 1>,
      skipped: this.skipped,
    };
    this.store.setItem(this.draftKey(), JSON.stringify(draft));
  }

  private restoreDraft(): void {
    const raw = this.store.getItem(this.draftKey());
    if (raw === null) return;
    try {
      const draft = JSON.parse(raw) as Draft;
      if (draft.round !== this.round) return;
      const ids = new Set(this.items.map((p) => p.id));
      for (const [pid, value] of Object.entries(draft.staged)) {
        if (ids.has(pid) && (value === 0 || value === 1)) this.staged.set(pid, value);
      }
      this.skipped = draft.skipped.filter((pid) => ids.has(pid));
    } catch {
      this.store.removeItem(this.draftKey());
    }
  }
}
