/** Typed client for the session-editing HTTP API. */

import type { MaskJson } from "./mask.js";

export interface StackInfo {
  stack_id: string;
  segmenter: { name: string; max_image_side: number; supports_overlapping_masks: boolean };
  scorer: { name: string; score_range: string; languages: string[]; max_image_side: number };
  inpainter: { name: string; native_resolution: number; deterministic: boolean; accepts_seed: boolean };
}

export interface RankedSegmentJson {
  segment_id: string;
  mask: MaskJson;
  bbox: [number, number, number, number];
  area: number;
  raw_score: number;
  norm_score: number;
  rank: number;
}

export interface RankPreview {
  session_id: string;
  source_prompt: string;
  outcome: "matched" | "no_match";
  selected_segment_id: string | null;
  threshold_used: number;
  segments: RankedSegmentJson[];
}

export interface SelectionSummary {
  outcome: "matched" | "no_match";
  selected_segment_id: string | null;
  threshold_used: number;
  overridden: boolean;
}

export interface StepSummary {
  index: number;
  status: "applied" | "skipped_no_match" | "failed";
  instruction: { source_prompt: string; target_prompt: string };
  seed: number;
  error: string | null;
  image_url: string;
  selection: SelectionSummary | null;
}

export interface SessionSummary {
  session_id: string;
  width: number;
  height: number;
  config: Record<string, unknown>;
  current_step: number;
  steps: StepSummary[];
}

export interface CreateResult {
  session_id: string;
  width: number;
  height: number;
}

export class ApiError extends Error {
  override name = "ApiError";

  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
    readonly stage?: string,
  ) {
    super(`${status} ${code}: ${detail}`);
  }
}

async function raiseFor(response: Response): Promise<never> {
  let code = "unknown";
  let detail = response.statusText;
  let stage: string | undefined;
  try {
    const body = (await response.json()) as Record<string, unknown>;
    if (typeof body.error === "string") code = body.error;
    if (typeof body.detail === "string") detail = body.detail;
    if (typeof body.stage === "string") stage = body.stage;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, code, detail, stage);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = (...args) => globalThis.fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listStacks(): Promise<{ stacks: StackInfo[] }> {
    return this.request("/v1/stacks");
  }

  createSession(image: Blob, config?: Record<string, unknown>): Promise<CreateResult> {
    const form = new FormData();
    form.append("image", image, "upload.png");
    if (config !== undefined) form.append("config", JSON.stringify(config));
    return this.request("/v1/sessions", { method: "POST", body: form });
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request(`/v1/sessions/${encodeURIComponent(sessionId)}`);
  }

  rank(sessionId: string, sourcePrompt: string): Promise<RankPreview> {
    return this.post(`/v1/sessions/${encodeURIComponent(sessionId)}/rank`, {
      source_prompt: sourcePrompt,
    });
  }

  edit(
    sessionId: string,
    body: { source_prompt: string; target_prompt: string; override_segment_id?: string },
  ): Promise<StepSummary> {
    return this.post(`/v1/sessions/${encodeURIComponent(sessionId)}/edit`, body);
  }

  undoTo(sessionId: string, toStep: number): Promise<SessionSummary> {
    return this.post(`/v1/sessions/${encodeURIComponent(sessionId)}/undo`, {
      to_step: toStep,
    });
  }

  stepImageUrl(sessionId: string, index: number): string {
    return `${this.baseUrl}/v1/sessions/${encodeURIComponent(sessionId)}/steps/${index}/image`;
  }

  async fetchStepImage(sessionId: string, index: number): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.stepImageUrl(sessionId, index));
    if (!response.ok) await raiseFor(response);
    return new Uint8Array(await response.arrayBuffer());
  }
}
