// Typed client for the portal JSON API. All calls except login carry the
// bearer token; fetch is injectable so tests can run without a server.

import type { ImageEntry, Stroke, TracingRecord } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class PortalApi {
  token: string | null = null;

  constructor(private fetchImpl: FetchLike = (i, init) => fetch(i, init)) {}

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: string | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(path, { method, headers, body: payload });
    if (!resp.ok) {
      let message = `${resp.status}`;
      try {
        const err = (await resp.json()) as { error?: string };
        if (err.error) message = err.error;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, message);
    }
    if (resp.status === 204) return null;
    return resp.json();
  }

  async login(username: string, password: string): Promise<void> {
    const out = (await this.request("POST", "/api/login", { username, password })) as {
      token: string;
    };
    this.token = out.token;
  }

  async listImages(): Promise<ImageEntry[]> {
    return (await this.request("GET", "/api/images")) as ImageEntry[];
  }

  async getRecord(imageId: string): Promise<TracingRecord> {
    return (await this.request(
      "GET",
      `/api/images/${encodeURIComponent(imageId)}/strokes`,
    )) as TracingRecord;
  }

  async postStrokes(imageId: string, strokes: Stroke[]): Promise<void> {
    await this.request("POST", `/api/images/${encodeURIComponent(imageId)}/strokes`, {
      strokes,
    });
  }

  async submit(imageId: string): Promise<void> {
    await this.request("POST", `/api/images/${encodeURIComponent(imageId)}/submit`);
  }
}
