/**
 * Chronological event feed with cursor pagination and tail-follow.
 *
 * The feed keeps the records it has seen (deduplicated by sequence
 * number), marks alert rows for highlighting, and retries failed page
 * fetches with doubling backoff.
 */

import type { EventDto, EventsPage } from "./types.js";

export interface FetchPage {
  (params: { since?: string; cursor?: number; limit: number }): Promise<EventsPage>;
}

export const PAGE_LIMIT = 100;
const RETRY_BASE_MS = 1000;
const RETRY_CAP_MS = 15000;

export function isAlertRow(event: EventDto): boolean {
  return event.payload.type === "alert" && event.payload.suppressed !== true;
}

export class EventFeed {
  items: EventDto[] = [];
  private lastSeq: number | null = null;
  private retryMs = RETRY_BASE_MS;

  constructor(private readonly fetchPage: FetchPage,
              private readonly limit: number = PAGE_LIMIT) {}

  /** Pull every page the service has after the current tail. */
  async catchUp(): Promise<number> {
    let added = 0;
    for (;;) {
      let page: EventsPage;
      try {
        page = await this.fetchPage({
          cursor: this.lastSeq ?? 0,
          limit: this.limit,
        });
        this.retryMs = RETRY_BASE_MS;
      } catch {
        this.retryMs = Math.min(this.retryMs * 2, RETRY_CAP_MS);
        return added;
      }
      added += this.absorb(page.events);
      if (page.next_cursor === null) {
        return added;
      }
    }
  }

  /** Backoff delay to wait after a failed fetch before retrying. */
  get retryDelayMs(): number {
    return this.retryMs;
  }

  private absorb(events: EventDto[]): number {
    let added = 0;
    for (const event of events) {
      if (this.lastSeq === null || event.sequence_number > this.lastSeq) {
        this.items.push(event);
        this.lastSeq = event.sequence_number;
        added += 1;
      }
    }
    return added;
  }

  alertCount(): number {
    return this.items.filter(isAlertRow).length;
  }
}
