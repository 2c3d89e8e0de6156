import type { Api, InterpretResponse, StateOut } from './types';

// Injected by the build (see build.mjs); empty string means same-origin.
declare const __API_BASE__: string | undefined;

export function defaultApiBase(): string {
  return typeof __API_BASE__ === 'string' ? __API_BASE__ : '';
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    throw new Error(`service responded ${res.status}`);
  }
  return (await res.json()) as T;
}

export class HttpApi implements Api {
  constructor(private readonly base: string = defaultApiBase()) {}

  interpret(text: string): Promise<InterpretResponse> {
    return fetch(`${this.base}/api/interpret`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text }),
    }).then((res) => asJson<InterpretResponse>(res));
  }

  reset(): Promise<StateOut> {
    return fetch(`${this.base}/api/reset`, { method: 'POST' }).then((res) =>
      asJson<StateOut>(res),
    );
  }

  state(): Promise<StateOut> {
    return fetch(`${this.base}/api/state`).then((res) => asJson<StateOut>(res));
  }
}
