import { vi } from "vitest";

import type { ApiClient } from "../src/state";
import type { BatchView, Vocab } from "../src/types";

export const VOCAB: Vocab = {
  relevance: ["no_music", "non_version", "version", "match"],
  uncertainty: [
    { name: "none", scope: null, code: null },
    { name: "song_medley", scope: "song", code: "So" },
  ],
};

export function batchView(): BatchView {
  return {
    work_id: "w1",
    query: { video_id: "q", url: "u", title: "T", performer: "P", channel: "C" },
    candidates: [
      {
        video_id: "c1",
        url: "u1",
        title: "t1",
        performer: "",
        channel: "ch",
        tally: { version: 2, non_version: 2 },
        vote_final: null,
        worker_labels: ["version", "version", "non_version", "non_version"],
        expert_relevance: null,
        expert_uncertainty: null,
        expert_note: null,
      },
    ],
  };
}

export function fakeClient(overrides: Partial<ApiClient> = {}): ApiClient {
  return {
    loadVocab: vi.fn().mockResolvedValue(VOCAB),
    loadBatches: vi.fn().mockResolvedValue([
      { work_id: "w1", n_candidates: 1, n_undecided: 1, n_curated: 0 },
    ]),
    loadBatch: vi.fn().mockResolvedValue(batchView()),
    loadProgress: vi.fn().mockResolvedValue({
      n_items: 1,
      n_labeled: 0,
      n_undecided_remaining: 1,
      n_batches: 1,
    }),
    submitLabel: vi.fn().mockResolvedValue({
      ok: true,
      video_id: "c1",
      relevance: "version",
      uncertainty_class: "song_medley",
      note: "",
    }),
    fetchExport: vi.fn().mockResolvedValue("video_id\trelevance\tuncertainty\tnote\n"),
    ...overrides,
  };
}
