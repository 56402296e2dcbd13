// Payload types mirroring the monitor service's JSON contract.
// Field names here are frozen; the service's contract tests pin the same
// shapes on the other side of the wire.

export type RiskRatio = number | 'inf';

export interface CauseRow {
  cause_id: string;
  itemset: Record<string, string>;
  occurrence: number;
  support: number;
  confidence: number;
  risk_ratio: RiskRatio;
  rank: number;
  matched_entries: number;
}

export interface FimRow {
  itemset: Record<string, string>;
  occurrence: number;
  support: number;
  confidence: number;
  risk_ratio: RiskRatio;
  rank: number;
}

export interface Report {
  window_id: number;
  causes: CauseRow[];
  fim_table: FimRow[];
  clean_count: number;
  wall_time_s: number;
}

export interface AlertCauseSummary {
  cause_id: string;
  itemset: Record<string, string>;
  risk_ratio: RiskRatio;
}

export interface Alert {
  id: number;
  window_id: number;
  causes: AlertCauseSummary[];
  created_at: number;
  state: 'open' | 'acknowledged' | 'adapted';
}

export interface AlertsResponse {
  alerts: Alert[];
}

export interface PoolVersion {
  version_id: string;
  itemset: Record<string, string>;
  created_at: number;
  last_updated: number;
  risk_ratio: RiskRatio;
}

export interface PoolResponse {
  capacity: number | null;
  versions: PoolVersion[];
}

export type Mode = 'autopilot' | 'manual';

export interface ModeResponse {
  mode: Mode;
}

export interface TimelinePoint {
  window_id: number;
  value: number;
}

export interface TimelineResponse {
  metric: string;
  points: TimelinePoint[];
}

export interface AdaptationResult {
  adapted: { cause_id: string; version_id: string }[];
  skipped: { cause_id: string; reason: string }[];
}
