import type { InterpretResponse, SpanOut, StateOut } from './types';

// One color class per tag; anything unlisted falls back to .tag-other.
const TAG_CLASSES = new Set([
  'BUY', 'SELL', 'OPEN', 'CLOSE', 'ADD', 'REMOVE', 'FILTER',
  'INSTRUMENT', 'INDICATOR', 'COMPANY', 'PRICE', 'QUANTITY',
  'NUMBER', 'TIMEFRAME', 'NEWS_TOPIC',
]);

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBadge(
  container: HTMLElement,
  intent: string,
  confidence: number,
): void {
  container.replaceChildren();
  const badge = el('span', `badge badge-${intent.toLowerCase()}`, intent);
  badge.dataset.testid = 'intent-badge';
  const conf = el('span', 'confidence', `${(confidence * 100).toFixed(1)}%`);
  conf.dataset.testid = 'intent-confidence';
  container.append(badge, conf);
}

// The reported spans partition a subset of the characters; everything between
// spans renders as plain runs so the concatenated text is exactly the input.
export function renderSpans(
  container: HTMLElement,
  text: string,
  spans: SpanOut[],
): void {
  container.replaceChildren();
  let pos = 0;
  for (const span of spans) {
    if (span.start > pos) {
      container.append(el('span', 'run-plain', text.slice(pos, span.start)));
    }
    const cls = TAG_CLASSES.has(span.tag) ? span.tag.toLowerCase() : 'other';
    const node = el('span', `run-tag tag-${cls}`, text.slice(span.start, span.end));
    node.dataset.tag = span.tag;
    node.dataset.start = String(span.start);
    node.dataset.end = String(span.end);
    node.title = span.tag;
    container.append(node);
    pos = span.end;
  }
  if (pos < text.length) {
    container.append(el('span', 'run-plain', text.slice(pos)));
  }
}

export function renderCharts(container: HTMLElement, state: StateOut): void {
  container.replaceChildren();
  for (const chart of state.charts) {
    const card = el('div', 'chart-card');
    card.dataset.testid = 'chart-card';
    card.append(el('h3', 'chart-name', chart.instrument));
    const list = el('ul', 'indicator-list');
    for (const ind of chart.indicators) {
      list.append(el('li', 'indicator', ind));
    }
    card.append(list);
    container.append(card);
  }
}

export function renderNews(container: HTMLElement, state: StateOut): void {
  container.replaceChildren();
  for (const topic of state.news_filters) {
    const chip = el('span', 'chip', topic);
    chip.dataset.testid = 'news-chip';
    container.append(chip);
  }
}

export function renderBlotter(container: HTMLElement, state: StateOut): void {
  container.replaceChildren();
  for (const order of state.orders) {
    const row = el('tr', `order-row order-${order.side.toLowerCase()}`);
    row.dataset.testid = 'order-row';
    row.append(
      el('td', 'order-seq', String(order.sequence)),
      el('td', 'order-side', order.side),
      el('td', 'order-qty', order.quantity),
      el('td', 'order-price', order.price ?? 'market'),
      el('td', 'order-instrument', order.instrument),
    );
    container.append(row);
  }
}

export function renderHistory(container: HTMLElement, entries: string[]): void {
  container.replaceChildren();
  for (const entry of entries) {
    container.append(el('li', 'history-entry', entry));
  }
}

export function renderBanner(container: HTMLElement, message: string | null): void {
  container.textContent = message ?? '';
  container.classList.toggle('banner-visible', message !== null);
}

export function renderState(
  panels: { charts: HTMLElement; news: HTMLElement; blotter: HTMLElement },
  state: StateOut,
): void {
  renderCharts(panels.charts, state);
  renderNews(panels.news, state);
  renderBlotter(panels.blotter, state);
}

export function renderInterpretation(
  panels: { badge: HTMLElement; spans: HTMLElement },
  response: InterpretResponse,
): void {
  renderBadge(panels.badge, response.intent, response.confidence);
  renderSpans(panels.spans, response.text, response.spans);
}
