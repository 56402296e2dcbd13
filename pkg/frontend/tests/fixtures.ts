// Recorded responses from a live monitor service fed the five-row toy
// drift log (captured once; wall_time_s and created_at pinned). These are
// the ground truth for the verbatim-rendering checks.

import type {
  AlertsResponse,
  ModeResponse,
  PoolResponse,
  Report,
  TimelineResponse,
} from '../src/types.js';

export const REPORT_FIXTURE: Report = {
  window_id: 0,
  causes: [
    {
      cause_id: '0:0',
      itemset: { weather: 'snow' },
      occurrence: 0.4,
      support: 0.6666666666666666,
      confidence: 1.0,
      risk_ratio: 3.0,
      rank: 0,
      matched_entries: 2,
    },
  ],
  fim_table: [
    { itemset: { weather: 'snow' }, occurrence: 0.4, support: 0.6666666666666666, confidence: 1.0, risk_ratio: 3.0, rank: 0 },
    { itemset: { device_id: 'android_21', weather: 'snow' }, occurrence: 0.2, support: 0.3333333333333333, confidence: 1.0, risk_ratio: 2.0, rank: 1 },
    { itemset: { device_id: 'android_42', weather: 'snow' }, occurrence: 0.2, support: 0.3333333333333333, confidence: 1.0, risk_ratio: 2.0, rank: 2 },
    { itemset: { location: 'Helsinki', weather: 'snow' }, occurrence: 0.2, support: 0.3333333333333333, confidence: 1.0, risk_ratio: 2.0, rank: 3 },
    { itemset: { location: 'New York', weather: 'snow' }, occurrence: 0.2, support: 0.3333333333333333, confidence: 1.0, risk_ratio: 2.0, rank: 4 },
    { itemset: { device_id: 'android_21', location: 'New York', weather: 'snow' }, occurrence: 0.2, support: 0.3333333333333333, confidence: 1.0, risk_ratio: 2.0, rank: 5 },
    { itemset: { device_id: 'android_42', location: 'Helsinki', weather: 'snow' }, occurrence: 0.2, support: 0.3333333333333333, confidence: 1.0, risk_ratio: 2.0, rank: 6 },
    { itemset: { device_id: 'android_21' }, occurrence: 0.4, support: 0.6666666666666666, confidence: 0.6666666666666666, risk_ratio: 1.3333333333333333, rank: 7 },
    { itemset: { location: 'New York' }, occurrence: 0.4, support: 0.6666666666666666, confidence: 0.6666666666666666, risk_ratio: 1.3333333333333333, rank: 8 },
    { itemset: { device_id: 'android_21', location: 'New York' }, occurrence: 0.4, support: 0.6666666666666666, confidence: 0.6666666666666666, risk_ratio: 1.3333333333333333, rank: 9 },
  ],
  clean_count: 3,
  wall_time_s: 0.0021,
};

export const EMPTY_REPORT_FIXTURE: Report = {
  window_id: 1,
  causes: [],
  fim_table: [],
  clean_count: 5,
  wall_time_s: 0.0008,
};

export const ALERTS_FIXTURE: AlertsResponse = {
  alerts: [
    {
      id: 0,
      window_id: 0,
      causes: [{ cause_id: '0:0', itemset: { weather: 'snow' }, risk_ratio: 3.0 }],
      created_at: 1754650000.0,
      state: 'open',
    },
  ],
};

export const POOL_FIXTURE: PoolResponse = {
  capacity: 4,
  versions: [
    {
      version_id: 'clean',
      itemset: {},
      created_at: 0.0,
      last_updated: 0.0,
      risk_ratio: 0.0,
    },
  ],
};

export const MODE_FIXTURE: ModeResponse = { mode: 'manual' };

export const TIMELINE_FIXTURE: TimelineResponse = {
  metric: 'drift_rate',
  points: [{ window_id: 0, value: 0.6 }],
};

export const PROXY_FIXTURE: TimelineResponse = {
  metric: 'accuracy_proxy',
  points: [{ window_id: 0, value: 0.4 }],
};
