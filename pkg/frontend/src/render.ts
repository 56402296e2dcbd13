import type { DashboardState } from './state.js';
import type { RiskRatio, TimelineResponse } from './types.js';

// Every number shown in a table is the service's value verbatim; the
// client never recomputes or reformats metrics.
export function verbatim(value: number | RiskRatio): string {
  return String(value);
}

function itemsetLabel(itemset: Record<string, string>): string {
  const pairs = Object.entries(itemset).sort(([a], [b]) => (a < b ? -1 : 1));
  if (pairs.length === 0) return '(clean)';
  return pairs.map(([k, v]) => `${k}=${v}`).join(' + ');
}

function el(tag: string, className: string | null, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function section(title: string, id: string): HTMLElement {
  const box = el('section', 'panel');
  box.id = id;
  box.appendChild(el('h2', null, title));
  return box;
}

function renderBanner(state: DashboardState): HTMLElement | null {
  if (!state.banner && !state.stale) return null;
  const banner = el('div', 'banner', state.banner ?? 'connection lost, retrying');
  banner.id = 'banner';
  if (state.stale) banner.appendChild(el('span', 'stale-tag', ' (showing stale data)'));
  return banner;
}

function renderHeader(state: DashboardState): HTMLElement {
  const header = el('header', 'topbar');
  header.appendChild(el('h1', null, 'driftwatch ops'));
  const mode = el('span', `mode-pill mode-${state.mode ?? 'unknown'}`, state.mode ?? '...');
  mode.id = 'mode-pill';
  header.appendChild(mode);
  const toggle = el('button', 'action', 'toggle mode') as HTMLButtonElement;
  toggle.id = 'toggle-mode';
  toggle.dataset.action = 'toggle-mode';
  toggle.disabled = state.mode === null || state.busy;
  header.appendChild(toggle);
  return header;
}

function renderTimeline(state: DashboardState): HTMLElement {
  const box = section('Drift rate by window', 'timeline');
  const chart = (series: TimelineResponse | null, cls: string) => {
    const row = el('div', `chart ${cls}`);
    if (!series || series.points.length === 0) {
      row.appendChild(el('span', 'empty', 'no windows yet'));
      return row;
    }
    for (const point of series.points) {
      const bar = el('div', 'bar');
      bar.style.height = `${Math.round(Math.min(1, Math.max(0, point.value)) * 80) + 2}px`;
      bar.title = `window ${point.window_id}: ${verbatim(point.value)}`;
      bar.dataset.windowId = String(point.window_id);
      bar.dataset.value = verbatim(point.value);
      row.appendChild(bar);
    }
    return row;
  };
  box.appendChild(el('h3', null, state.timeline?.metric ?? 'drift_rate'));
  box.appendChild(chart(state.timeline, 'drift'));
  box.appendChild(el('h3', null, state.accuracyProxy?.metric ?? 'accuracy_proxy'));
  box.appendChild(chart(state.accuracyProxy, 'proxy'));
  return box;
}

function renderAlerts(state: DashboardState): HTMLElement {
  const box = section('Alerts', 'alerts');
  if (state.alerts.length === 0) {
    box.appendChild(el('p', 'empty', 'no alerts'));
    return box;
  }
  const list = el('ul', 'alert-list');
  for (const alert of state.alerts) {
    const item = el('li', `alert alert-${alert.state}`);
    item.dataset.alertId = String(alert.id);
    item.appendChild(el('span', 'alert-title', `#${alert.id} window ${alert.window_id}`));
    item.appendChild(
      el('span', 'alert-causes', alert.causes.map((c) => itemsetLabel(c.itemset)).join(', '))
    );
    item.appendChild(el('span', 'alert-state', alert.state));
    if (alert.state === 'open') {
      const ack = el('button', 'action small', 'ack') as HTMLButtonElement;
      ack.dataset.action = 'ack-alert';
      ack.dataset.alertId = String(alert.id);
      item.appendChild(ack);
    }
    list.appendChild(item);
  }
  box.appendChild(list);
  return box;
}

const CAUSE_COLUMNS = ['', 'rank', 'cause', 'occurrence', 'support', 'confidence', 'risk ratio', 'matched'];

function renderCauses(state: DashboardState): HTMLElement {
  const box = section('Root causes', 'causes');
  if (state.reportError !== null) {
    const err = el('p', 'error', `report unavailable: ${state.reportError}`);
    err.id = 'report-error';
    box.appendChild(err);
    return box; // no partial table on malformed payloads
  }
  const report = state.report;
  if (report === null) {
    box.appendChild(el('p', 'empty', 'no analysis yet'));
    return box;
  }
  box.appendChild(
    el('p', 'meta', `window ${report.window_id}, clean entries: ${report.clean_count}`)
  );
  if (report.causes.length === 0) {
    const none = el('p', 'empty', 'no drift detected');
    none.id = 'no-drift';
    box.appendChild(none);
    return box;
  }
  const table = el('table', 'cause-table') as HTMLTableElement;
  const head = table.createTHead().insertRow();
  for (const column of CAUSE_COLUMNS) head.appendChild(el('th', null, column));
  const body = table.createTBody();
  // rows in the service's order: rank ordering is the service's job
  for (const cause of report.causes) {
    const row = body.insertRow();
    row.dataset.causeId = cause.cause_id;
    const pick = row.insertCell();
    const checkbox = document.createElement('input');
    checkbox.type = 'checkbox';
    checkbox.dataset.action = 'toggle-cause';
    checkbox.dataset.causeId = cause.cause_id;
    checkbox.checked = state.selected.includes(cause.cause_id);
    pick.appendChild(checkbox);
    const rank = row.insertCell();
    rank.textContent = verbatim(cause.rank);
    rank.dataset.field = 'rank';
    const label = row.insertCell();
    label.textContent = itemsetLabel(cause.itemset);
    label.dataset.label = 'cause';
    const cells: [string, string][] = [
      ['occurrence', verbatim(cause.occurrence)],
      ['support', verbatim(cause.support)],
      ['confidence', verbatim(cause.confidence)],
      ['risk_ratio', verbatim(cause.risk_ratio)],
      ['matched_entries', verbatim(cause.matched_entries)],
    ];
    for (const [field, text] of cells) {
      const cell = row.insertCell();
      cell.textContent = text;
      cell.dataset.field = field;
    }
  }
  box.appendChild(table);

  const controls = el('div', 'controls');
  const adapt = el('button', 'action', 'adapt selected') as HTMLButtonElement;
  adapt.id = 'adapt-selected';
  adapt.dataset.action = 'adapt-selected';
  adapt.dataset.windowId = String(report.window_id);
  // gated: in autopilot the service would reject the trigger, so the
  // control is disabled and no request is possible
  adapt.disabled = !(state.mode === 'manual' && state.selected.length > 0 && !state.busy);
  controls.appendChild(adapt);
  const analyze = el('button', 'action', 'analyze next window') as HTMLButtonElement;
  analyze.id = 'trigger-analysis';
  analyze.dataset.action = 'trigger-analysis';
  analyze.dataset.windowId = String(report.window_id + 1);
  analyze.disabled = state.busy;
  controls.appendChild(analyze);
  box.appendChild(controls);
  return box;
}

function renderPool(state: DashboardState): HTMLElement {
  const box = section('Model pool', 'pool');
  const pool = state.pool;
  if (pool === null) {
    box.appendChild(el('p', 'empty', 'pool not loaded'));
    return box;
  }
  box.appendChild(el('p', 'meta', `capacity: ${pool.capacity === null ? 'uncapped' : verbatim(pool.capacity)}`));
  const table = el('table', 'pool-table') as HTMLTableElement;
  const head = table.createTHead().insertRow();
  for (const column of ['version', 'cause', 'risk ratio', 'last updated']) {
    head.appendChild(el('th', null, column));
  }
  const body = table.createTBody();
  for (const version of pool.versions) {
    const row = body.insertRow();
    row.insertCell().textContent = version.version_id;
    row.insertCell().textContent = itemsetLabel(version.itemset);
    const rr = row.insertCell();
    rr.textContent = verbatim(version.risk_ratio);
    rr.dataset.field = 'risk_ratio';
    const updated = row.insertCell();
    updated.textContent = verbatim(version.last_updated);
    updated.dataset.field = 'last_updated';
  }
  box.appendChild(table);
  return box;
}

export function render(state: DashboardState, root: HTMLElement): void {
  root.textContent = '';
  root.appendChild(renderHeader(state));
  const banner = renderBanner(state);
  if (banner) root.appendChild(banner);
  const main = el('main', 'grid');
  main.appendChild(renderTimeline(state));
  main.appendChild(renderAlerts(state));
  main.appendChild(renderCauses(state));
  main.appendChild(renderPool(state));
  root.appendChild(main);
}
