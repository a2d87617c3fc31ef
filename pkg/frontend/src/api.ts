// Typed client for the curation REST API. The UI talks to the server only
// through these functions; no direct file access.

import type {
  BatchSummary,
  BatchView,
  LabelAck,
  LabelSubmission,
  Progress,
  Vocab,
} from "./types";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(base: string, route: string): Promise<T> {
  const resp = await fetch(base + route);
  if (!resp.ok) {
    throw new ApiError(resp.status, await errorText(resp));
  }
  return (await resp.json()) as T;
}

async function errorText(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    return typeof body.error === "string" ? body.error : resp.statusText;
  } catch {
    return resp.statusText;
  }
}

export function loadVocab(base: string): Promise<Vocab> {
  return getJson<Vocab>(base, "/api/vocab");
}

export function loadBatches(base: string): Promise<BatchSummary[]> {
  return getJson<BatchSummary[]>(base, "/api/batches");
}

export function loadBatch(base: string, workId: string): Promise<BatchView> {
  return getJson<BatchView>(base, `/api/batch/${encodeURIComponent(workId)}`);
}

export function loadProgress(base: string): Promise<Progress> {
  return getJson<Progress>(base, "/api/progress");
}

export async function submitLabel(
  base: string,
  workId: string,
  submission: LabelSubmission,
): Promise<LabelAck> {
  const resp = await fetch(
    `${base}/api/batch/${encodeURIComponent(workId)}/label`,
    {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    },
  );
  if (!resp.ok) {
    throw new ApiError(resp.status, await errorText(resp));
  }
  return (await resp.json()) as LabelAck;
}

export async function fetchExport(base: string): Promise<string> {
  const resp = await fetch(base + "/api/export");
  if (!resp.ok) {
    throw new ApiError(resp.status, await errorText(resp));
  }
  return await resp.text();
}
