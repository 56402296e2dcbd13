// Dashboard acceptance: the three contract behaviors, stated directly.
// (The broader render/state suites cover the same ground in more detail.)

import { beforeEach, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { render } from '../src/render.js';
import { initialState, Store } from '../src/state.js';
import {
  ALERTS_FIXTURE,
  MODE_FIXTURE,
  POOL_FIXTURE,
  PROXY_FIXTURE,
  REPORT_FIXTURE,
  TIMELINE_FIXTURE,
} from './fixtures.js';
import { stubService } from './stub.js';

let root: HTMLElement;
beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById('app') as HTMLElement;
});

function fixtureState() {
  const state = initialState();
  state.mode = MODE_FIXTURE.mode;
  state.alerts = ALERTS_FIXTURE.alerts;
  state.pool = POOL_FIXTURE;
  state.timeline = TIMELINE_FIXTURE;
  state.accuracyProxy = PROXY_FIXTURE;
  state.report = REPORT_FIXTURE;
  return state;
}

describe('acceptance: dashboard contract', () => {
  it('renders the recorded toy-log report as a single {snow} row', () => {
    render(fixtureState(), root);
    const rows = root.querySelectorAll('.cause-table tbody tr');
    expect(rows).toHaveLength(1);
    expect(rows[0].querySelector('[data-label="cause"]')?.textContent).toBe('weather=snow');
    expect(rows[0].querySelector('[data-field="risk_ratio"]')?.textContent).toBe('3');
  });

  it('gates triggers by mode: disabled control and no request in autopilot', async () => {
    const state = fixtureState();
    state.mode = 'autopilot';
    state.selected = ['0:0'];
    render(state, root);
    expect((root.querySelector('#adapt-selected') as HTMLButtonElement).disabled).toBe(true);

    const routes = {
      'GET /api/mode': { payload: { mode: 'autopilot' } },
      'GET /api/alerts': { payload: ALERTS_FIXTURE },
      'GET /api/pool': { payload: POOL_FIXTURE },
      'GET /api/timeline?metric=drift_rate': { payload: TIMELINE_FIXTURE },
      'GET /api/timeline?metric=accuracy_proxy': { payload: PROXY_FIXTURE },
      'GET /api/reports/0': { payload: REPORT_FIXTURE },
    };
    const stub = stubService(routes);
    const store = new Store(new ApiClient('http://stub', stub.fetchFn));
    await store.poll();
    store.toggleCause('0:0');
    await store.adaptSelected(0);
    expect(stub.calls.some((c) => c.path === '/api/adaptation/run')).toBe(false);
  });

  it('renders every metric verbatim from the recorded response', () => {
    render(fixtureState(), root);
    const recorded = new Set<string>();
    const collect = (value: unknown): void => {
      if (typeof value === 'number' || typeof value === 'string') recorded.add(String(value));
      else if (Array.isArray(value)) value.forEach(collect);
      else if (typeof value === 'object' && value !== null) Object.values(value).forEach(collect);
    };
    collect(REPORT_FIXTURE);
    collect(POOL_FIXTURE);
    collect(TIMELINE_FIXTURE);
    collect(PROXY_FIXTURE);
    const cells = root.querySelectorAll('[data-field]');
    expect(cells.length).toBeGreaterThan(0);
    for (const cell of cells) {
      expect(recorded.has(cell.textContent ?? '')).toBe(true);
    }
  });
});
