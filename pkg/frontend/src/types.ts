// Shapes served by the curation REST API.

export interface UncertaintyEntry {
  name: string;
  scope: string | null;
  code: string | null;
}

export interface Vocab {
  relevance: string[];
  uncertainty: UncertaintyEntry[];
}

export interface BatchSummary {
  work_id: string;
  n_candidates: number;
  n_undecided: number;
  n_curated: number;
}

export interface VersionView {
  video_id: string;
  url: string;
  title: string;
  performer: string;
  channel: string;
}

export interface CandidateRow extends VersionView {
  tally: Record<string, number>;
  vote_final: string | null;
  worker_labels: string[];
  expert_relevance: string | null;
  expert_uncertainty: string | null;
  expert_note: string | null;
}

export interface BatchView {
  work_id: string;
  query: VersionView;
  candidates: CandidateRow[];
}

export interface Progress {
  n_items: number;
  n_labeled: number;
  n_undecided_remaining: number;
  n_batches: number;
}

export interface LabelSubmission {
  video_id: string;
  relevance: string;
  uncertainty_class: string;
  note?: string;
}

export interface LabelAck {
  ok: boolean;
  video_id: string;
  relevance: string;
  uncertainty_class: string;
  note: string;
}
