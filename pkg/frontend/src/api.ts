// Typed client for the elicitation session service.
// All ids are strings on the wire; errors arrive as {code, message}.

export interface OutcomeRef {
  id: string;
  label: string;
  question_text: string;
}

export interface HistoryRef {
  id: string;
  label: string;
  prior: number;
}

export interface StrategyRef {
  id: string;
  label: string;
  description: string;
}

export interface Lottery {
  p_best: number;
  p_worst: number;
  best_outcome: OutcomeRef;
  worst_outcome: OutcomeRef;
}

export interface Question {
  kind: 'preference' | 'feature';
  text: string;
  outcome_i: OutcomeRef;
  outcome_j?: OutcomeRef;
  lottery?: Lottery;
}

export interface SessionResult {
  cluster_label: string;
  prototype_id: string;
  prototype_values: number[];
  strategy: StrategyRef;
  expected_utility: number;
}

export interface SessionState {
  session_id: string;
  history_id: string;
  history_label: string;
  status: 'IN_PROGRESS' | 'COMPLETE';
  questions_answered: number;
  max_questions: number;
  transcript: Array<{ question: Question; answer: boolean }>;
  question: Question | null;
  result: SessionResult | null;
}

export interface ModelInfo {
  outcomes: OutcomeRef[];
  histories: HistoryRef[];
  strategies: StrategyRef[];
  best_anchor: string;
  worst_anchor: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let code = 'http_error';
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, code, message);
}

export class SessionApi {
  constructor(private baseUrl = '') {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    return parse<T>(response);
  }

  getModel(): Promise<ModelInfo> {
    return this.request<ModelInfo>('/model');
  }

  createSession(historyId: string): Promise<SessionState> {
    return this.request<SessionState>('/sessions', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ history_id: historyId }),
    });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${sessionId}`);
  }

  submitAnswer(sessionId: string, answer: boolean): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${sessionId}/answer`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ answer }),
    });
  }
}
