/** Thin fetch client for the telemetry endpoints. */

import type {
  EventsPage,
  FeedResponse,
  PumpResponse,
  SnapshotDto,
} from "./types.js";

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.base + path, { cache: "no-store" });
    if (!resp.ok && resp.status !== 503) {
      throw new Error(`GET ${path}: HTTP ${resp.status}`);
    }
    const body = (await resp.json()) as T & { error?: string };
    if (resp.status === 503) {
      throw new Error(body.error ?? "service unavailable");
    }
    return body;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await resp.json()) as T;
  }

  readings(): Promise<SnapshotDto> {
    return this.getJson<SnapshotDto>("/api/readings");
  }

  events(params: { since?: string; cursor?: number; limit: number }):
      Promise<EventsPage> {
    const query = new URLSearchParams();
    if (params.since !== undefined) query.set("since", params.since);
    if (params.cursor !== undefined) query.set("cursor", String(params.cursor));
    query.set("limit", String(params.limit));
    return this.getJson<EventsPage>(`/api/events?${query}`);
  }

  feed(portions: number): Promise<FeedResponse> {
    return this.postJson<FeedResponse>("/api/feed", { portions });
  }

  pump(on: boolean): Promise<PumpResponse> {
    return this.postJson<PumpResponse>("/api/pump", { on });
  }
}
