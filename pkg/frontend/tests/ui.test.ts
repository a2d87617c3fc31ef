// @vitest-environment happy-dom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { CurationStore } from "../src/state";
import { mount } from "../src/ui";
import { fakeClient } from "./helpers";

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

describe("ui", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
  });

  it("renders the batch list after init", async () => {
    const store = new CurationStore("http://server", fakeClient());
    mount(root, store);
    await store.init();
    const buttons = root.querySelectorAll("nav.batches .batch");
    expect(buttons).toHaveLength(1);
    expect(buttons[0].textContent).toContain("w1");
    expect(buttons[0].textContent).toContain("1 undecided");
  });

  it("shows the empty state when the store is empty", async () => {
    const store = new CurationStore(
      "http://server",
      fakeClient({ loadBatches: vi.fn().mockResolvedValue([]) }),
    );
    mount(root, store);
    await store.init();
    expect(root.querySelector(".batches .empty")?.textContent).toContain("No batches");
  });

  it("opens a batch and renders candidate cards with tallies", async () => {
    const store = new CurationStore("http://server", fakeClient());
    mount(root, store);
    await store.init();
    await store.openBatch("w1");
    const card = root.querySelector(".candidate")!;
    expect(card.textContent).toContain("t1");
    expect(card.textContent).toContain("version: 2");
    expect(card.textContent).toContain("undecided");
    const selects = card.querySelectorAll("select");
    expect(selects).toHaveLength(2);
    const relevanceOptions = [...selects[0].querySelectorAll("option")].map(
      (o) => o.getAttribute("value"),
    );
    expect(relevanceOptions).toEqual(["no_music", "non_version", "version", "match"]);
  });

  it("saving a label goes through the store and shows the expert line", async () => {
    const client = fakeClient();
    const store = new CurationStore("http://server", client);
    mount(root, store);
    await store.init();
    await store.openBatch("w1");
    const card = root.querySelector(".candidate")!;
    const [relevance, uncertainty] = card.querySelectorAll("select");
    relevance.value = "version";
    uncertainty.value = "song_medley";
    (card.querySelector("button.save") as HTMLButtonElement).click();
    await flush();
    expect(client.submitLabel).toHaveBeenCalledWith(
      "http://server",
      "w1",
      expect.objectContaining({
        video_id: "c1",
        relevance: "version",
        uncertainty_class: "song_medley",
      }),
    );
    expect(root.querySelector(".candidate .expert")?.textContent).toContain(
      "version / song_medley",
    );
  });

  it("disables labeling and shows a retry banner when the vocabulary fails", async () => {
    const store = new CurationStore(
      "http://server",
      fakeClient({ loadVocab: vi.fn().mockRejectedValue(new Error("down")) }),
    );
    mount(root, store);
    await store.init();
    await store.openBatch("w1");
    expect(root.querySelector(".banner.error")?.textContent).toContain(
      "labeling disabled",
    );
    expect(root.querySelector(".label-form .disabled")).not.toBeNull();
  });

  it("export button stays disabled until a label exists", async () => {
    const progress = vi
      .fn()
      .mockResolvedValueOnce({ n_items: 1, n_labeled: 0, n_undecided_remaining: 1, n_batches: 1 })
      .mockResolvedValueOnce({ n_items: 1, n_labeled: 1, n_undecided_remaining: 0, n_batches: 1 });
    const store = new CurationStore(
      "http://server",
      fakeClient({ loadProgress: progress }),
    );
    mount(root, store);
    await store.init();
    expect(
      (root.querySelector("button.export") as HTMLButtonElement).disabled,
    ).toBe(true);
    await store.openBatch("w1");
    await store.submit({
      video_id: "c1",
      relevance: "version",
      uncertainty_class: "none",
    });
    expect(
      (root.querySelector("button.export") as HTMLButtonElement).disabled,
    ).toBe(false);
  });

  it("renders a row error when the server rejects a submission", async () => {
    const { ApiError } = await import("../src/api");
    const store = new CurationStore(
      "http://server",
      fakeClient({
        submitLabel: vi.fn().mockRejectedValue(new ApiError(400, "invalid uncertainty")),
      }),
    );
    mount(root, store);
    await store.init();
    await store.openBatch("w1");
    await store.submit({
      video_id: "c1",
      relevance: "version",
      uncertainty_class: "song_medley",
    });
    expect(root.querySelector(".row-error")?.textContent).toContain("invalid uncertainty");
    expect(root.querySelector(".candidate .expert")).toBeNull(); // rolled back
  });
});
