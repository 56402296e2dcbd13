import { ApiClient } from './api.js';
import { render } from './render.js';
import { Store } from './state.js';

// Static bundle, any file server: point it at the service with
// ?api=http://host:port (defaults to the page's own origin).
const params = new URLSearchParams(location.search);
const apiBase = params.get('api') ?? location.origin;
const pollMs = Number(params.get('poll') ?? '2000');

const api = new ApiClient(apiBase);
const store = new Store(api);
const root = document.getElementById('app') as HTMLElement;

store.onChange = () => render(store.state, root);

root.addEventListener('click', (event) => {
  const target = event.target as HTMLElement;
  const action = target.dataset.action;
  if (!action) return;
  if (action === 'toggle-mode') void store.toggleMode();
  if (action === 'ack-alert') void store.acknowledge(Number(target.dataset.alertId));
  if (action === 'toggle-cause') store.toggleCause(target.dataset.causeId ?? '');
  if (action === 'adapt-selected') void store.adaptSelected(Number(target.dataset.windowId));
  if (action === 'trigger-analysis') void store.triggerAnalysis(Number(target.dataset.windowId));
});

render(store.state, root);
void store.poll();
setInterval(() => void store.poll(), pollMs);
