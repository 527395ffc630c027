/** Typed client for the session service HTTP API. */

import type { ApiError, Label, SessionState, Voxel } from "./types.js";

export class ApiRequestError extends Error {
  constructor(public readonly detail: ApiError) {
    super(`[${detail.stage}] ${detail.message}`);
  }
}

async function parseError(resp: Response): Promise<ApiRequestError> {
  let detail: ApiError;
  try {
    detail = (await resp.json()) as ApiError;
  } catch {
    detail = { code: resp.status, stage: "transport", message: resp.statusText };
  }
  return new ApiRequestError(detail);
}

export class SessionClient {
  constructor(private readonly baseUrl = "") {}

  async createSession(image: Blob, config: string, truth?: Blob): Promise<SessionState> {
    const form = new FormData();
    form.append("image", image, "image");
    form.append("config", config);
    if (truth) form.append("truth", truth, "truth");
    const resp = await fetch(`${this.baseUrl}/sessions`, { method: "POST", body: form });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as SessionState;
  }

  async getState(sessionId: string): Promise<SessionState> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}`);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as SessionState;
  }

  async addScribble(sessionId: string, label: Label, voxels: Voxel[]): Promise<SessionState> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/scribbles`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ label, voxels }),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as SessionState;
  }

  async undo(sessionId: string): Promise<SessionState> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/undo`, { method: "POST" });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as SessionState;
  }

  async fetchArtifact(
    sessionId: string,
    kind: "seed" | "strength" | "label" | "saliency" | "image",
  ): Promise<ArrayBuffer> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/artifacts/${kind}`);
    if (!resp.ok) throw await parseError(resp);
    return resp.arrayBuffer();
  }
}
