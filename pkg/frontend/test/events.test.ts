import { describe, expect, it } from "vitest";

import { EventFeed, isAlertRow } from "../src/events.js";
import type { EventDto, EventsPage } from "../src/types.js";

function event(seq: number, type = "sensor_snapshot",
               extra: Record<string, unknown> = {}): EventDto {
  return {
    sequence_number: seq,
    timestamp: `2025-01-01T00:00:${String(seq).padStart(2, "0")}.000000Z`,
    payload: { type, ...extra },
  };
}

function pagedBackend(all: EventDto[], pageSize: number) {
  return async (params: { cursor?: number; limit: number }):
      Promise<EventsPage> => {
    const after = params.cursor ?? 0;
    const rest = all.filter((e) => e.sequence_number > after);
    const page = rest.slice(0, Math.min(pageSize, params.limit));
    const more = rest.length > page.length;
    return {
      events: page,
      next_cursor: more ? page[page.length - 1].sequence_number : null,
    };
  };
}

describe("EventFeed", () => {
  it("pages through the whole backlog with cursors", async () => {
    const all = Array.from({ length: 25 }, (_, i) => event(i + 1));
    const feed = new EventFeed(pagedBackend(all, 10), 10);
    const added = await feed.catchUp();
    expect(added).toBe(25);
    expect(feed.items.map((e) => e.sequence_number)).toEqual(
      all.map((e) => e.sequence_number),
    );
  });

  it("follows the tail without duplicating rows", async () => {
    const all = [event(1), event(2)];
    const backend = pagedBackend(all, 10);
    const feed = new EventFeed(backend, 10);
    await feed.catchUp();
    all.push(event(3, "alert", { alert: { message: "hot" }, suppressed: false }));
    const added = await feed.catchUp();
    expect(added).toBe(1);
    expect(feed.items).toHaveLength(3);
  });

  it("highlights emitted alerts but not suppressed ones", () => {
    const emitted = event(1, "alert", { suppressed: false });
    const suppressed = event(2, "alert", { suppressed: true });
    const plain = event(3);
    expect(isAlertRow(emitted)).toBe(true);
    expect(isAlertRow(suppressed)).toBe(false);
    expect(isAlertRow(plain)).toBe(false);
  });

  it("counts alert rows", async () => {
    const all = [
      event(1),
      event(2, "alert", { suppressed: false }),
      event(3, "alert", { suppressed: false }),
      event(4, "alert", { suppressed: true }),
    ];
    const feed = new EventFeed(pagedBackend(all, 10), 10);
    await feed.catchUp();
    expect(feed.alertCount()).toBe(2);
  });

  it("empty log yields an empty feed without error", async () => {
    const feed = new EventFeed(pagedBackend([], 10), 10);
    expect(await feed.catchUp()).toBe(0);
    expect(feed.items).toEqual([]);
  });

  it("failed fetches back off exponentially and recover", async () => {
    let failing = true;
    const all = [event(1)];
    const good = pagedBackend(all, 10);
    const feed = new EventFeed(async (params) => {
      if (failing) throw new Error("down");
      return good(params);
    }, 10);

    expect(await feed.catchUp()).toBe(0);
    const first = feed.retryDelayMs;
    expect(await feed.catchUp()).toBe(0);
    expect(feed.retryDelayMs).toBe(first * 2);
    failing = false;
    expect(await feed.catchUp()).toBe(1);
    expect(feed.retryDelayMs).toBe(1000); // reset after success
  });
});
