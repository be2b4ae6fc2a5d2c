/**
 * Live parameter panel state.
 *
 * One snapshot poll every refresh period; a new poll never starts while
 * another is in flight, and a whole snapshot is applied atomically so a
 * render can never mix two cycles.  Tile colour comes straight from the
 * service's status field - thresholds are never re-derived client-side -
 * except that readings older than two refresh periods go stale (grey).
 */

import type { SnapshotDto } from "./types.js";

export type TileStatus = "ok" | "alert" | "stale";

export interface Tile {
  label: string;
  unit: string;
  value: number | null;
  serviceStatus: "ok" | "alert";
}

export interface PanelModel {
  tiles: Record<string, Tile>;
  pumpOn: boolean | null;
  feederTotalG: number;
  jamFlag: boolean;
  pollCycle: number | null;
  lastSuccessMs: number | null;
  consecutiveFailures: number;
}

export const REFRESH_MS = 5000;
export const STALE_AFTER_PERIODS = 2;

export interface PanelOptions {
  fetchSnapshot: () => Promise<SnapshotDto>;
  now?: () => number;
  refreshMs?: number;
}

export class PanelStore {
  readonly refreshMs: number;
  model: PanelModel = {
    tiles: {},
    pumpOn: null,
    feederTotalG: 0,
    jamFlag: false,
    pollCycle: null,
    lastSuccessMs: null,
    consecutiveFailures: 0,
  };
  /** bumps once per applied snapshot; renders key off this */
  version = 0;
  pollStartsMs: number[] = [];
  private inFlight = false;
  private readonly fetchSnapshot: () => Promise<SnapshotDto>;
  private readonly now: () => number;

  constructor(opts: PanelOptions) {
    this.fetchSnapshot = opts.fetchSnapshot;
    this.now = opts.now ?? (() => Date.now());
    this.refreshMs = opts.refreshMs ?? REFRESH_MS;
  }

  /** One poll; concurrent calls collapse into the in-flight one. */
  async poll(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    this.pollStartsMs.push(this.now());
    try {
      const snap = await this.fetchSnapshot();
      this.applySnapshot(snap);
    } catch {
      // keep the last values; staleness reveals the outage
      this.model.consecutiveFailures += 1;
    } finally {
      this.inFlight = false;
    }
  }

  /**
   * Poll forever on the refresh cadence.  The next poll is scheduled a
   * full period after the previous one STARTED, so successful polls tick
   * every refreshMs even when responses are quick.
   */
  startLoop(
    schedule: (fn: () => void, ms: number) => void = (fn, ms) =>
      void setTimeout(fn, ms),
  ): void {
    const step = () => {
      const started = this.now();
      void this.poll().finally(() => {
        const elapsed = this.now() - started;
        schedule(step, Math.max(0, this.refreshMs - elapsed));
      });
    };
    step();
  }

  private applySnapshot(snap: SnapshotDto): void {
    const tiles: Record<string, Tile> = {};
    for (const [kind, reading] of Object.entries(snap.readings)) {
      tiles[kind] = {
        label: reading.label,
        unit: reading.unit,
        value: reading.value,
        serviceStatus: snap.statuses[kind] ?? "ok",
      };
    }
    this.model = {
      tiles,
      pumpOn: snap.pump.on,
      feederTotalG: snap.feeder.total_dispensed_g,
      jamFlag: snap.feeder.jam_flag,
      pollCycle: snap.poll_cycle,
      lastSuccessMs: this.now(),
      consecutiveFailures: 0,
    };
    this.version += 1;
  }

  isStale(): boolean {
    if (this.model.lastSuccessMs === null) return true;
    return this.now() - this.model.lastSuccessMs >
      STALE_AFTER_PERIODS * this.refreshMs;
  }

  /** Colour for one tile: grey when stale, else the service's verdict. */
  tileStatus(kind: string): TileStatus {
    if (this.isStale()) return "stale";
    return this.model.tiles[kind]?.serviceStatus ?? "ok";
  }
}
