import { ApiClient, ApiError } from './api.js';
import type {
  Alert,
  Mode,
  PoolResponse,
  Report,
  TimelineResponse,
} from './types.js';

export interface DashboardState {
  mode: Mode | null;
  stale: boolean;
  banner: string | null;
  timeline: TimelineResponse | null;
  accuracyProxy: TimelineResponse | null;
  alerts: Alert[];
  pool: PoolResponse | null;
  report: Report | null;
  reportError: string | null;
  selected: string[];
  busy: boolean;
}

export function initialState(): DashboardState {
  return {
    mode: null,
    stale: false,
    banner: null,
    timeline: null,
    accuracyProxy: null,
    alerts: [],
    pool: null,
    report: null,
    reportError: null,
    selected: [],
    busy: false,
  };
}

/** Reject payloads that do not match the report contract; a malformed
 * response must produce an error state, never a partial table. */
export function validateReport(payload: unknown): Report {
  const p = payload as Report;
  if (typeof p !== 'object' || p === null) throw new Error('report is not an object');
  if (typeof p.window_id !== 'number') throw new Error('report.window_id missing');
  if (!Array.isArray(p.causes)) throw new Error('report.causes is not a list');
  if (typeof p.clean_count !== 'number') throw new Error('report.clean_count missing');
  for (const cause of p.causes) {
    if (typeof cause.cause_id !== 'string') throw new Error('cause.cause_id missing');
    if (typeof cause.itemset !== 'object' || cause.itemset === null) {
      throw new Error('cause.itemset missing');
    }
    for (const field of ['occurrence', 'support', 'confidence', 'rank'] as const) {
      if (typeof cause[field] !== 'number') throw new Error(`cause.${field} missing`);
    }
    if (typeof cause.risk_ratio !== 'number' && cause.risk_ratio !== 'inf') {
      throw new Error('cause.risk_ratio missing');
    }
  }
  return p;
}

/** Owns the view model. Reads poll the service; actions apply an
 * optimistic update and roll back when the service rejects. */
export class Store {
  state: DashboardState = initialState();
  onChange: () => void = () => {};

  constructor(private readonly api: ApiClient) {}

  private emit(): void {
    this.onChange();
  }

  async poll(): Promise<void> {
    try {
      const [mode, alerts, pool, timeline, proxy] = await Promise.all([
        this.api.mode(),
        this.api.alerts(),
        this.api.pool(),
        this.api.timeline('drift_rate'),
        this.api.timeline('accuracy_proxy'),
      ]);
      this.state.mode = mode.mode;
      this.state.alerts = alerts.alerts;
      this.state.pool = pool;
      this.state.timeline = timeline;
      this.state.accuracyProxy = proxy;
      this.state.stale = false;
      this.state.banner = null;
      const latest = this.latestReportWindow();
      if (latest !== null) {
        try {
          this.state.report = validateReport(await this.api.report(latest));
          this.state.reportError = null;
        } catch (err) {
          this.state.report = null;
          this.state.reportError = String((err as Error).message ?? err);
        }
      }
    } catch (err) {
      // keep showing the last good data, but flag it
      this.state.stale = true;
      this.state.banner = `connection lost, retrying: ${(err as Error).message}`;
    }
    this.emit();
  }

  private latestReportWindow(): number | null {
    if (this.state.alerts.length === 0) return null;
    return Math.max(...this.state.alerts.map((a) => a.window_id));
  }

  toggleCause(causeId: string): void {
    const idx = this.state.selected.indexOf(causeId);
    if (idx >= 0) this.state.selected.splice(idx, 1);
    else this.state.selected.push(causeId);
    this.emit();
  }

  /** Adaptation triggers require manual mode; in autopilot the control is
   * disabled and no request leaves the browser. */
  canAdapt(): boolean {
    return this.state.mode === 'manual' && this.state.selected.length > 0 && !this.state.busy;
  }

  async toggleMode(): Promise<void> {
    if (this.state.mode === null) return;
    const previous = this.state.mode;
    const next: Mode = previous === 'manual' ? 'autopilot' : 'manual';
    this.state.mode = next; // optimistic
    this.emit();
    try {
      const confirmed = await this.api.setMode(next);
      this.state.mode = confirmed.mode;
    } catch (err) {
      this.state.mode = previous; // rollback
      this.state.banner = `mode change rejected: ${(err as Error).message}`;
    }
    this.emit();
  }

  async triggerAnalysis(windowId: number): Promise<void> {
    this.state.busy = true;
    this.emit();
    try {
      this.state.report = validateReport(await this.api.runAnalysis(windowId));
      this.state.reportError = null;
    } catch (err) {
      const reason = err instanceof ApiError ? `${err.status} ${err.message}` : String(err);
      this.state.banner = `analysis rejected: ${reason}`;
    }
    this.state.busy = false;
    this.emit();
  }

  async adaptSelected(windowId: number): Promise<void> {
    if (!this.canAdapt()) return; // gated: never send what the service would refuse
    const selection = [...this.state.selected];
    this.state.busy = true;
    this.state.selected = []; // optimistic: assume the triggers land
    this.emit();
    try {
      await this.api.runAdaptation(windowId, selection);
      await this.poll();
    } catch (err) {
      this.state.selected = selection; // rollback
      const reason = err instanceof ApiError ? `${err.status} ${err.message}` : String(err);
      this.state.banner = `adaptation rejected: ${reason}`;
    }
    this.state.busy = false;
    this.emit();
  }

  async acknowledge(alertId: number): Promise<void> {
    try {
      const updated = await this.api.ackAlert(alertId);
      this.state.alerts = this.state.alerts.map((a) => (a.id === updated.id ? updated : a));
    } catch (err) {
      this.state.banner = `ack rejected: ${(err as Error).message}`;
    }
    this.emit();
  }
}
