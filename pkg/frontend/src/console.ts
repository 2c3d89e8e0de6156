import type { Api, StateOut } from './types';
import { EMPTY_STATE } from './types';
import {
  renderBanner,
  renderHistory,
  renderInterpretation,
  renderState,
} from './render';

// The console is a pure client: every panel is a render of the latest
// service response, and no interpretation happens on this side.

const SKELETON = `
  <form data-testid="command-form" class="command-form">
    <input data-testid="command-input" class="command-input" type="text"
           placeholder="type a command, e.g. open eurusd chart" autocomplete="off">
    <button data-testid="submit" type="submit">interpret</button>
    <button data-testid="reset" type="button">reset session</button>
  </form>
  <div data-testid="banner" class="banner"></div>
  <section class="panel">
    <h2>interpretation</h2>
    <div data-testid="intent" class="intent"></div>
    <div data-testid="spans" class="spans"></div>
  </section>
  <section class="panel">
    <h2>charts</h2>
    <div data-testid="charts" class="charts"></div>
  </section>
  <section class="panel">
    <h2>news filters</h2>
    <div data-testid="news" class="news"></div>
  </section>
  <section class="panel">
    <h2>orders</h2>
    <table class="blotter">
      <thead>
        <tr><th>#</th><th>side</th><th>qty</th><th>price</th><th>instrument</th></tr>
      </thead>
      <tbody data-testid="blotter"></tbody>
    </table>
  </section>
  <section class="panel">
    <h2>history</h2>
    <ul data-testid="history" class="history"></ul>
  </section>
`;

export type Console = {
  submit(text: string): Promise<void>;
  reset(): Promise<void>;
  busy(): boolean;
};

export function createConsole(root: HTMLElement, api: Api): Console {
  root.innerHTML = SKELETON;
  const byId = (id: string): HTMLElement => {
    const node = root.querySelector<HTMLElement>(`[data-testid="${id}"]`);
    if (!node) throw new Error(`missing panel ${id}`);
    return node;
  };

  const form = byId('command-form') as HTMLFormElement;
  const input = byId('command-input') as HTMLInputElement;
  const submitButton = byId('submit') as HTMLButtonElement;
  const resetButton = byId('reset') as HTMLButtonElement;
  const banner = byId('banner');
  const panels = {
    badge: byId('intent'),
    spans: byId('spans'),
    charts: byId('charts'),
    news: byId('news'),
    blotter: byId('blotter'),
  };

  const history: string[] = [];
  let inFlight = false;
  let lastState: StateOut = EMPTY_STATE;

  renderState(panels, lastState);

  function setBusy(value: boolean): void {
    inFlight = value;
    input.disabled = value;
    submitButton.disabled = value;
    resetButton.disabled = value;
  }

  async function submit(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || inFlight) return;
    setBusy(true);
    try {
      const response = await api.interpret(trimmed);
      history.push(trimmed);
      renderHistory(byId('history'), history);
      renderInterpretation(panels, response);
      if (response.error) {
        // in-band refusal: banner up, state panels untouched
        renderBanner(banner, `${response.error.type}: ${response.error.message}`);
      } else {
        renderBanner(banner, null);
        lastState = response.state;
        renderState(panels, lastState);
      }
    } catch {
      renderBanner(banner, 'service unreachable, command not applied; retry');
    } finally {
      setBusy(false);
    }
  }

  async function reset(): Promise<void> {
    if (inFlight) return;
    setBusy(true);
    try {
      lastState = await api.reset();
      renderState(panels, lastState);
      renderInterpretation(panels, {
        text: '', intent: 'NONE', confidence: 0,
        spans: [], command: null, error: null, state: lastState,
      });
      renderBanner(banner, null);
    } catch {
      // keep the last snapshot on a failed reset
      renderBanner(banner, 'service unreachable, session not reset; retry');
    } finally {
      setBusy(false);
    }
  }

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void submit(input.value).then(() => {
      input.value = '';
      input.focus();
    });
  });
  resetButton.addEventListener('click', () => void reset());

  return { submit, reset, busy: () => inFlight };
}
