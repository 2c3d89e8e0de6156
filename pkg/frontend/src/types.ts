// Mirrors of the service's JSON wire types. The console does no
// interpretation of its own; these shapes are rendered verbatim.

export type SpanOut = {
  tag: string;
  text: string;
  start: number;
  end: number;
};

export type OrderOut = {
  side: 'BUY' | 'SELL';
  quantity: string;
  price: string | null;
  instrument: string;
  sequence: number;
};

export type ChartOut = {
  instrument: string;
  indicators: string[];
};

export type StateOut = {
  charts: ChartOut[];
  news_filters: string[];
  orders: OrderOut[];
};

export type ErrorOut = {
  type: string;
  message: string;
};

export type InterpretResponse = {
  text: string;
  intent: string;
  confidence: number;
  spans: SpanOut[];
  command: Record<string, unknown> | null;
  error: ErrorOut | null;
  state: StateOut;
};

export interface Api {
  interpret(text: string): Promise<InterpretResponse>;
  reset(): Promise<StateOut>;
  state(): Promise<StateOut>;
}

export const EMPTY_STATE: StateOut = { charts: [], news_filters: [], orders: [] };
