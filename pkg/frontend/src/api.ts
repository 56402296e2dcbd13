import type {
  AdaptationResult,
  Alert,
  AlertsResponse,
  Mode,
  ModeResponse,
  PoolResponse,
  Report,
  TimelineResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the operator endpoints. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init)
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { 'Content-Type': 'application/json' };
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const payload = await response.json();
    if (!response.ok) {
      const err = payload?.error ?? {};
      throw new ApiError(response.status, err.code ?? 'unknown', err.message ?? 'request failed');
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request('GET', '/api/health');
  }

  mode(): Promise<ModeResponse> {
    return this.request('GET', '/api/mode');
  }

  setMode(mode: Mode): Promise<ModeResponse> {
    return this.request('POST', '/api/mode', { mode });
  }

  alerts(): Promise<AlertsResponse> {
    return this.request('GET', '/api/alerts');
  }

  ackAlert(id: number): Promise<Alert> {
    return this.request('POST', `/api/alerts/${id}/ack`);
  }

  report(windowId: number): Promise<Report> {
    return this.request('GET', `/api/reports/${windowId}`);
  }

  pool(): Promise<PoolResponse> {
    return this.request('GET', '/api/pool');
  }

  timeline(metric: string): Promise<TimelineResponse> {
    return this.request('GET', `/api/timeline?metric=${encodeURIComponent(metric)}`);
  }

  runAnalysis(windowId: number): Promise<Report> {
    return this.request('POST', '/api/analysis/run', { window_id: windowId });
  }

  runAdaptation(windowId: number, causeIds: string[]): Promise<AdaptationResult> {
    // the body lists exactly the operator's selection, nothing more
    return this.request('POST', '/api/adaptation/run', {
      window_id: windowId,
      cause_ids: causeIds,
    });
  }
}
