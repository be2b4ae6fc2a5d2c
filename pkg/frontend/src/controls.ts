/**
 * Feed button and pump switch behaviour.
 *
 * Both controls disable while a request is in flight (a double-click sends
 * one request), and the pump switch only ever shows the acknowledged state
 * returned by the service - never the optimistic one.
 */

import type { FeedResponse, PumpResponse } from "./types.js";

export type FeedOutcome =
  | { kind: "dispensed"; grams: number }
  | { kind: "low_food" }
  | { kind: "busy" }
  | { kind: "error"; message: string; retryable: boolean };

export class FeedButton {
  inFlight = false;
  lastOutcome: FeedOutcome | null = null;

  constructor(private readonly post: (portions: number) => Promise<FeedResponse>) {}

  async feedNow(portions = 1): Promise<FeedOutcome> {
    if (this.inFlight) {
      return { kind: "busy" };
    }
    this.inFlight = true;
    try {
      const resp = await this.post(portions);
      if (resp.error) {
        this.lastOutcome = {
          kind: "error",
          message: resp.error,
          retryable: resp.error === "timeout",
        };
      } else if (resp.accepted) {
        this.lastOutcome = { kind: "dispensed", grams: resp.dispensed_g };
      } else {
        this.lastOutcome = { kind: "low_food" };
      }
    } catch (err) {
      this.lastOutcome = {
        kind: "error",
        message: String(err),
        retryable: true,
      };
    } finally {
      this.inFlight = false;
    }
    return this.lastOutcome;
  }
}

export type PumpOutcome =
  | { kind: "acknowledged"; on: boolean }
  | { kind: "busy" }
  | { kind: "error"; message: string };

export class PumpSwitch {
  /** what the UI shows; null until the first snapshot or ack arrives */
  displayed: boolean | null = null;
  inFlight = false;

  constructor(private readonly post: (on: boolean) => Promise<PumpResponse>) {}

  /** Snapshot refreshes may update the switch when no command is pending. */
  syncFromSnapshot(on: boolean): void {
    if (!this.inFlight) {
      this.displayed = on;
    }
  }

  async toggle(desired: boolean): Promise<PumpOutcome> {
    if (this.inFlight) {
      return { kind: "busy" };
    }
    this.inFlight = true;
    const before = this.displayed;
    try {
      const resp = await this.post(desired);
      if (resp.error !== undefined) {
        this.displayed = before; // revert, the command did not land
        return { kind: "error", message: resp.error };
      }
      this.displayed = resp.on; // acknowledged state only
      return { kind: "acknowledged", on: resp.on };
    } catch (err) {
      this.displayed = before;
      return { kind: "error", message: String(err) };
    } finally {
      this.inFlight = false;
    }
  }
}
