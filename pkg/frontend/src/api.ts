/**
 * Typed client for the clipscript HTTP API.
 *
 * Every UI state change goes through exactly one of these calls; the client
 * holds no state of its own, so any view can be rebuilt from the GET
 * endpoints alone. The fetch implementation is injectable for tests.
 */

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ClipInfo {
  id: string;
  media_ref: string;
  duration: number;
  native_fps: number;
  width: number;
  height: number;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobInfo {
  id: string;
  kind: string;
  state: JobState;
  error?: string | null;
  result_ref?: string | null;
}

export interface PromptDoc {
  text: string;
  provenance: string;
}

export interface FrameDoc {
  timestamp: number;
  image_ref: string;
}

export interface ChatMessageDoc {
  role: "user" | "assistant";
  text: string;
}

export interface IterationRecordDoc {
  index: number;
  score: number;
  prompt: PromptDoc;
}

export interface ReconstructionDoc {
  id: string;
  status: string;
  best_index: number;
  records: IterationRecordDoc[];
  failure_reason?: string | null;
}

export interface VersionDoc {
  version_index: number;
  prompt_snapshot: PromptDoc;
  first_frame_ref: string;
  clip: { id: string; media_ref: string; duration: number };
}

export interface RewriteSessionDoc {
  id: string;
  working_prompt: PromptDoc;
  working_first_frame: FrameDoc;
  chat: ChatMessageDoc[];
  versions: {
    version_index: number;
    prompt_snapshot: PromptDoc;
    first_frame_snapshot: FrameDoc;
    clip: { id: string; media_ref: string };
  }[];
  frame_history: FrameDoc[];
}

export interface RewriteState {
  id: string;
  session: RewriteSessionDoc | null;
  reconstruction: ReconstructionDoc | null;
  jobs: JobInfo[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let message = `HTTP ${resp.status}`;
  let field: string | undefined;
  try {
    const body = (await resp.json()) as { error?: string; field?: string };
    if (body.error) message = body.error;
    field = body.field;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, message, field);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  mediaUrl(digest: string): string {
    return `${this.baseUrl}/media/${digest}`;
  }

  async uploadClip(data: Blob | Uint8Array, filename = "clip.json"): Promise<ClipInfo> {
    const form = new FormData();
    const blob = data instanceof Blob ? data : new Blob([data as BlobPart]);
    form.append("file", blob, filename);
    return this.json<ClipInfo>("/clips", { method: "POST", body: form });
  }

  async startRewrite(clipId: string): Promise<{ id: string; job: JobInfo }> {
    return this.json("/rewrites", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ clip_id: clipId }),
    });
  }

  async getRewrite(rewriteId: string): Promise<RewriteState> {
    return this.json(`/rewrites/${rewriteId}`);
  }

  async putPrompt(rewriteId: string, text: string): Promise<RewriteSessionDoc> {
    return this.json(`/rewrites/${rewriteId}/prompt`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  async requestAssist(rewriteId: string, goal: string): Promise<{ job: JobInfo }> {
    return this.json(`/rewrites/${rewriteId}/assist`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ goal }),
    });
  }

  async requestFirstFrame(rewriteId: string, goal: string): Promise<{ job: JobInfo }> {
    return this.json(`/rewrites/${rewriteId}/first-frame`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ goal }),
    });
  }

  async revertFirstFrame(rewriteId: string): Promise<RewriteSessionDoc> {
    return this.json(`/rewrites/${rewriteId}/first-frame/revert`, { method: "POST" });
  }

  async generateVersion(rewriteId: string): Promise<{ job: JobInfo }> {
    return this.json(`/rewrites/${rewriteId}/versions`, { method: "POST" });
  }

  async listVersions(rewriteId: string): Promise<{ versions: VersionDoc[] }> {
    return this.json(`/rewrites/${rewriteId}/versions`);
  }

  async compareVersions(
    rewriteId: string,
    a: number,
    b: number,
  ): Promise<{ a: VersionDoc; b: VersionDoc }> {
    return this.json(`/rewrites/${rewriteId}/versions/${a}/compare/${b}`);
  }

  async getJob(jobId: string): Promise<JobInfo> {
    return this.json(`/jobs/${jobId}`);
  }

  async health(): Promise<{ status: string }> {
    return this.json("/healthz");
  }
}
