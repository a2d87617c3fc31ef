// UI state: vocabulary, batch list, the open batch, and label submission
// with optimistic updates that roll back on server rejection.
//
// Every selectable value comes from the server's vocabulary endpoint;
// submissions are validated against it before anything is sent.

import * as api from "./api";
import type {
  BatchSummary,
  BatchView,
  CandidateRow,
  LabelSubmission,
  Progress,
  Vocab,
} from "./types";

export type Listener = () => void;

export interface ApiClient {
  loadVocab: typeof api.loadVocab;
  loadBatches: typeof api.loadBatches;
  loadBatch: typeof api.loadBatch;
  loadProgress: typeof api.loadProgress;
  submitLabel: typeof api.submitLabel;
  fetchExport: typeof api.fetchExport;
}

export class CurationStore {
  vocab: Vocab | null = null;
  vocabError: string | null = null;
  batches: BatchSummary[] | null = null;
  batchesError: string | null = null;
  current: BatchView | null = null;
  currentError: string | null = null;
  progress: Progress | null = null;
  rowErrors = new Map<string, string>();
  pending = new Set<string>();

  private listeners: Listener[] = [];

  constructor(
    readonly base: string,
    private client: ApiClient = api,
  ) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  get labelingEnabled(): boolean {
    return this.vocab !== null;
  }

  get exportEnabled(): boolean {
    return (this.progress?.n_labeled ?? 0) > 0;
  }

  async init(): Promise<void> {
    await Promise.all([this.refreshVocab(), this.refreshBatches(), this.refreshProgress()]);
  }

  async refreshVocab(): Promise<void> {
    try {
      this.vocab = await this.client.loadVocab(this.base);
      this.vocabError = null;
    } catch (err) {
      this.vocab = null;
      this.vocabError = `vocabulary unavailable: ${message(err)}; labeling disabled`;
    }
    this.notify();
  }

  async refreshBatches(): Promise<void> {
    try {
      this.batches = await this.client.loadBatches(this.base);
      this.batchesError = null;
    } catch (err) {
      // keep whatever list we already have; the banner offers a retry
      this.batchesError = message(err);
    }
    this.notify();
  }

  async refreshProgress(): Promise<void> {
    try {
      this.progress = await this.client.loadProgress(this.base);
    } catch {
      // progress is cosmetic; never block labeling on it
    }
    this.notify();
  }

  async openBatch(workId: string): Promise<void> {
    try {
      this.current = await this.client.loadBatch(this.base, workId);
      this.currentError = null;
      this.rowErrors.clear();
    } catch (err) {
      this.currentError = message(err);
    }
    this.notify();
  }

  validate(submission: LabelSubmission): string | null {
    if (!this.vocab) {
      return "vocabulary not loaded";
    }
    if (!this.vocab.relevance.includes(submission.relevance)) {
      return `relevance ${submission.relevance} is not in the served vocabulary`;
    }
    if (!this.vocab.uncertainty.some((u) => u.name === submission.uncertainty_class)) {
      return `uncertainty class ${submission.uncertainty_class} is not in the served vocabulary`;
    }
    return null;
  }

  row(videoId: string): CandidateRow | undefined {
    return this.current?.candidates.find((c) => c.video_id === videoId);
  }

  async submit(submission: LabelSubmission): Promise<boolean> {
    const invalid = this.validate(submission);
    if (invalid !== null) {
      this.rowErrors.set(submission.video_id, invalid);
      this.notify();
      return false;
    }
    const batch = this.current;
    const row = this.row(submission.video_id);
    if (!batch || !row) {
      this.rowErrors.set(submission.video_id, "row is not part of the open batch");
      this.notify();
      return false;
    }
    const previous = {
      expert_relevance: row.expert_relevance,
      expert_uncertainty: row.expert_uncertainty,
      expert_note: row.expert_note,
    };
    // optimistic update: show the expert label immediately
    row.expert_relevance = submission.relevance;
    row.expert_uncertainty = submission.uncertainty_class;
    row.expert_note = submission.note ?? "";
    this.rowErrors.delete(submission.video_id);
    this.pending.add(submission.video_id);
    this.notify();
    try {
      await this.client.submitLabel(this.base, batch.work_id, submission);
      await this.refreshProgress();
      return true;
    } catch (err) {
      Object.assign(row, previous); // roll back
      this.rowErrors.set(submission.video_id, message(err));
      return false;
    } finally {
      this.pending.delete(submission.video_id);
      this.notify();
    }
  }

  async exportCurated(): Promise<string> {
    return await this.client.fetchExport(this.base);
  }
}

function message(err: unknown): string {
  if (err instanceof api.ApiError) {
    return `${err.status}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}
