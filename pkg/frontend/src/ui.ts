// DOM layer: renders the batch list, the open batch with its label pickers,
// and the progress/export header from the store state.

import { CurationStore } from "./state";
import type { CandidateRow } from "./types";

export function mount(root: HTMLElement, store: CurationStore): void {
  store.subscribe(() => render(root, store));
  render(root, store);
}

function el(tag: string, className = "", text = ""): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function render(root: HTMLElement, store: CurationStore): void {
  root.replaceChildren(header(store), banners(store), main(store));
}

function header(store: CurationStore): HTMLElement {
  const bar = el("header", "topbar");
  bar.appendChild(el("h1", "", "Curation"));
  const progress = store.progress;
  if (progress) {
    bar.appendChild(
      el(
        "span",
        "progress",
        `${progress.n_labeled} labeled / ${progress.n_items} items, ` +
          `${progress.n_undecided_remaining} undecided left`,
      ),
    );
  }
  const exportBtn = el("button", "export", "Export curated labels") as HTMLButtonElement;
  exportBtn.disabled = !store.exportEnabled;
  exportBtn.onclick = async () => {
    const text = await store.exportCurated();
    const blob = new Blob([text], { type: "text/tab-separated-values" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "curation.tsv";
    link.click();
    URL.revokeObjectURL(link.href);
  };
  bar.appendChild(exportBtn);
  return bar;
}

function banners(store: CurationStore): HTMLElement {
  const box = el("div", "banners");
  if (store.batchesError) {
    const banner = el("div", "banner error");
    banner.appendChild(el("span", "", `could not load batches: ${store.batchesError}`));
    const retry = el("button", "", "Retry");
    retry.onclick = () => void store.refreshBatches();
    banner.appendChild(retry);
    box.appendChild(banner);
  }
  if (store.vocabError) {
    const banner = el("div", "banner error");
    banner.appendChild(el("span", "", store.vocabError));
    const retry = el("button", "", "Retry");
    retry.onclick = () => void store.refreshVocab();
    banner.appendChild(retry);
    box.appendChild(banner);
  }
  return box;
}

function main(store: CurationStore): HTMLElement {
  const wrap = el("div", "main");
  wrap.appendChild(batchList(store));
  wrap.appendChild(batchPanel(store));
  return wrap;
}

function batchList(store: CurationStore): HTMLElement {
  const list = el("nav", "batches");
  if (store.batches === null) {
    list.appendChild(el("p", "empty", "loading batches…"));
    return list;
  }
  if (store.batches.length === 0) {
    list.appendChild(el("p", "empty", "No batches in the store."));
    return list;
  }
  for (const batch of store.batches) {
    const item = el("button", "batch");
    if (store.current?.work_id === batch.work_id) item.classList.add("open");
    item.appendChild(el("span", "work", batch.work_id));
    item.appendChild(
      el(
        "span",
        "counts",
        `${batch.n_curated}/${batch.n_candidates} curated` +
          (batch.n_undecided ? `, ${batch.n_undecided} undecided` : ""),
      ),
    );
    item.onclick = () => void store.openBatch(batch.work_id);
    list.appendChild(item);
  }
  return list;
}

function batchPanel(store: CurationStore): HTMLElement {
  const panel = el("section", "panel");
  const batch = store.current;
  if (!batch) {
    panel.appendChild(el("p", "empty", "Select a batch to review its candidates."));
    return panel;
  }
  const query = el("div", "query");
  query.appendChild(el("h2", "", `${batch.query.performer} - ${batch.query.title}`));
  query.appendChild(videoLink(batch.query.url, "open query video"));
  panel.appendChild(query);
  for (const row of batch.candidates) {
    panel.appendChild(candidateCard(store, row));
  }
  return panel;
}

function videoLink(url: string, text: string): HTMLElement {
  const link = el("a", "video", text) as HTMLAnchorElement;
  link.href = url;
  link.target = "_blank";
  link.rel = "noopener";
  return link;
}

function candidateCard(store: CurationStore, row: CandidateRow): HTMLElement {
  const card = el("article", "candidate");
  const head = el("div", "head");
  head.appendChild(el("strong", "", row.title || row.video_id));
  head.appendChild(el("span", "channel", row.channel));
  head.appendChild(videoLink(row.url, "watch"));
  card.appendChild(head);

  const votes = el("div", "votes");
  const tally = Object.entries(row.tally)
    .map(([label, count]) => `${label}: ${count}`)
    .join(", ");
  votes.appendChild(
    el("span", "tally", `votes: ${tally || "none"} -> ${row.vote_final ?? "undecided"}`),
  );
  if (row.worker_labels.length) {
    votes.appendChild(el("span", "workers", `workers: ${row.worker_labels.join(", ")}`));
  }
  card.appendChild(votes);

  card.appendChild(labelForm(store, row));

  const error = store.rowErrors.get(row.video_id);
  if (error) card.appendChild(el("p", "row-error", error));
  if (row.expert_relevance) {
    card.appendChild(
      el(
        "p",
        "expert",
        `expert: ${row.expert_relevance} / ${row.expert_uncertainty ?? "none"}` +
          (row.expert_note ? ` / ${row.expert_note}` : ""),
      ),
    );
  }
  return card;
}

function labelForm(store: CurationStore, row: CandidateRow): HTMLElement {
  const form = el("div", "label-form");
  const vocab = store.vocab;
  if (!vocab) {
    form.appendChild(el("p", "disabled", "labeling disabled until the vocabulary loads"));
    return form;
  }
  const relevance = document.createElement("select");
  for (const value of vocab.relevance) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    if (value === row.expert_relevance) option.selected = true;
    relevance.appendChild(option);
  }
  const uncertainty = document.createElement("select");
  for (const entry of vocab.uncertainty) {
    const option = document.createElement("option");
    option.value = entry.name;
    option.textContent = entry.scope ? `${entry.name} (${entry.scope})` : entry.name;
    if (entry.name === (row.expert_uncertainty ?? "none")) option.selected = true;
    uncertainty.appendChild(option);
  }
  const note = document.createElement("input");
  note.type = "text";
  note.placeholder = "note (optional)";
  note.value = row.expert_note ?? "";

  const save = el("button", "save", "Save label") as HTMLButtonElement;
  save.disabled = store.pending.has(row.video_id);
  save.onclick = () =>
    void store.submit({
      video_id: row.video_id,
      relevance: relevance.value,
      uncertainty_class: uncertainty.value,
      note: note.value,
    });

  form.append(relevance, uncertainty, note, save);
  return form;
}
