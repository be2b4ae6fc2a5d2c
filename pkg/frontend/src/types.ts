/** Wire shapes of the telemetry service responses. */

export interface ReadingDto {
  kind: string;
  value: number;
  timestamp: string;
  quality: "valid" | "smoothing" | "invalid";
  unit: string;
  label: string;
}

export interface SnapshotDto {
  server_time: string;
  poll_cycle: number;
  readings: Record<string, ReadingDto>;
  statuses: Record<string, "ok" | "alert">;
  pump: { on: boolean; last_toggle: string | null };
  feeder: {
    portion_mass_g: number;
    total_dispensed_g: number;
    jam_flag: boolean;
  };
}

export interface FeedResponse {
  accepted: boolean;
  dispensed_g: number;
  reason: string;
  feeder?: SnapshotDto["feeder"];
  error?: string;
}

export interface PumpResponse {
  on: boolean;
  last_toggle?: string;
  error?: string;
}

export interface EventDto {
  sequence_number: number;
  timestamp: string;
  payload: { type: string; [key: string]: unknown };
}

export interface EventsPage {
  events: EventDto[];
  next_cursor: number | null;
}

/** The seven parameter kinds, in display order. */
export const KIND_ORDER = [
  "air_temperature",
  "humidity",
  "water_temperature",
  "tds",
  "ph",
  "turbidity",
  "food_distance",
] as const;
