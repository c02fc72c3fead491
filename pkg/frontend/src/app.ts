// Session flow: pick a history, answer one yes/no question per round trip,
// read the recommendation. The server is the single source of truth; this
// client only renders session state and posts answers.

import { ApiError, ModelInfo, Question, SessionApi, SessionState } from './api.js';

export type Phase = 'loading' | 'pick-history' | 'question' | 'complete' | 'error';

interface AppState {
  phase: Phase;
  model: ModelInfo | null;
  session: SessionState | null;
  error: string | null;
  retry: (() => Promise<void>) | null;
}

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

const percent = (p: number) => `${(p * 100).toFixed(1)}%`;

export class ElicitApp {
  private state: AppState = {
    phase: 'loading',
    model: null,
    session: null,
    error: null,
    retry: null,
  };

  private inFlight = false;

  constructor(
    private root: HTMLElement,
    private api: SessionApi,
  ) {}

  async start(): Promise<void> {
    this.render();
    await this.guard(async () => {
      this.state.model = await this.api.getModel();
      const resumed = window.location.hash.match(/^#s=(\w+)$/);
      if (resumed) {
        this.state.session = await this.api.getSession(resumed[1]);
        this.state.phase = this.state.session.status === 'COMPLETE' ? 'complete' : 'question';
      } else {
        this.state.phase = 'pick-history';
      }
    });
  }

  async choose(historyId: string): Promise<void> {
    await this.guard(async () => {
      const session = await this.api.createSession(historyId);
      this.state.session = session;
      window.location.hash = `s=${session.session_id}`;
      this.state.phase = session.status === 'COMPLETE' ? 'complete' : 'question';
    });
  }

  async answer(value: boolean): Promise<void> {
    const session = this.state.session;
    if (!session || session.status !== 'IN_PROGRESS') return;
    await this.guard(async () => {
      const next = await this.api.submitAnswer(session.session_id, value);
      this.state.session = next;
      this.state.phase = next.status === 'COMPLETE' ? 'complete' : 'question';
    });
  }

  restart(): void {
    window.location.hash = '';
    this.state.session = null;
    this.state.phase = this.state.model ? 'pick-history' : 'loading';
    this.state.error = null;
    this.state.retry = null;
    this.render();
  }

  get busy(): boolean {
    return this.inFlight;
  }

  // one request in flight per session; re-entrant calls are dropped
  private async guard(action: () => Promise<void>): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    this.render();
    try {
      await action();
      this.state.error = null;
      this.state.retry = null;
    } catch (err) {
      this.state.error = err instanceof ApiError ? `${err.code}: ${err.message}`
        : err instanceof Error ? err.message : String(err);
      this.state.retry = action ? () => this.guard(action) : null;
      if (this.state.phase === 'loading') this.state.phase = 'error';
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  render(): void {
    this.root.textContent = '';
    const shell = el('div', 'app-shell');
    shell.appendChild(el('h1', 'app-title', 'Find your strategy'));
    if (this.state.error) shell.appendChild(this.renderError());
    switch (this.state.phase) {
      case 'loading':
        shell.appendChild(el('p', 'loading-note', 'Connecting to the service…'));
        break;
      case 'error':
        break; // banner already rendered
      case 'pick-history':
        shell.appendChild(this.renderHistoryPicker());
        break;
      case 'question':
        shell.appendChild(this.renderQuestion());
        break;
      case 'complete':
        shell.appendChild(this.renderResult());
        break;
    }
    this.root.appendChild(shell);
  }

  private renderError(): HTMLElement {
    const banner = el('div', 'error-banner');
    banner.appendChild(el('span', 'error-text', this.state.error ?? 'something went wrong'));
    if (this.state.retry) {
      const retry = el('button', 'btn-retry', 'Retry');
      retry.addEventListener('click', () => void this.state.retry?.());
      banner.appendChild(retry);
    }
    return banner;
  }

  private renderHistoryPicker(): HTMLElement {
    const panel = el('div', 'history-picker');
    panel.appendChild(el('p', 'prompt', 'Which group describes you?'));
    const list = el('div', 'history-list');
    for (const history of this.state.model?.histories ?? []) {
      const button = el('button', 'history-option', history.label);
      button.dataset.historyId = history.id;
      button.disabled = this.inFlight;
      button.addEventListener('click', () => void this.choose(history.id));
      list.appendChild(button);
    }
    panel.appendChild(list);
    return panel;
  }

  private renderQuestion(): HTMLElement {
    const session = this.state.session!;
    const question = session.question!;
    const panel = el('div', 'question-panel');
    panel.appendChild(el('p', 'progress',
      `Question ${session.questions_answered + 1} (of at most ${session.max_questions}) ` +
      `· ${session.history_label}`));
    panel.appendChild(el('p', 'question-text', question.text));
    if (question.kind === 'feature' && question.lottery) {
      panel.appendChild(this.renderLottery(question));
    } else if (question.outcome_j) {
      const pair = el('div', 'preference-pair');
      pair.appendChild(el('div', 'preference-option', question.outcome_i.question_text));
      pair.appendChild(el('div', 'preference-versus', 'versus'));
      pair.appendChild(el('div', 'preference-option', question.outcome_j.question_text));
      panel.appendChild(pair);
    }
    const buttons = el('div', 'answer-buttons');
    const yes = el('button', 'btn-yes', 'Yes');
    const no = el('button', 'btn-no', 'No');
    yes.disabled = no.disabled = this.inFlight;
    yes.addEventListener('click', () => void this.answer(true));
    no.addEventListener('click', () => void this.answer(false));
    buttons.appendChild(yes);
    buttons.appendChild(no);
    panel.appendChild(buttons);
    return panel;
  }

  // the standard lottery as a proportional two-segment bar, probabilities spelled out
  private renderLottery(question: Question): HTMLElement {
    const lottery = question.lottery!;
    const box = el('div', 'lottery-box');
    box.appendChild(el('p', 'lottery-caption', 'The lottery:'));
    const bar = el('div', 'lottery-bar');
    const best = el('div', 'lottery-best', percent(lottery.p_best));
    best.style.width = percent(lottery.p_best);
    best.title = lottery.best_outcome.label;
    const worst = el('div', 'lottery-worst', percent(lottery.p_worst));
    worst.style.width = percent(lottery.p_worst);
    worst.title = lottery.worst_outcome.label;
    bar.appendChild(best);
    bar.appendChild(worst);
    box.appendChild(bar);
    box.appendChild(el('p', 'lottery-legend',
      `${percent(lottery.p_best)} chance: ${lottery.best_outcome.question_text} · ` +
      `${percent(lottery.p_worst)} chance: ${lottery.worst_outcome.question_text}`));
    box.appendChild(el('p', 'lottery-ask',
      `Would you take “${question.outcome_i.question_text}” for certain instead?`));
    return box;
  }

  private renderResult(): HTMLElement {
    const session = this.state.session!;
    const result = session.result!;
    const model = this.state.model;
    const panel = el('div', 'result-panel');
    panel.appendChild(el('p', 'result-meta',
      `Matched cluster ${result.cluster_label} after ` +
      `${session.questions_answered} question${session.questions_answered === 1 ? '' : 's'} ` +
      `(prototype ${result.prototype_id}, ${session.history_label})`));
    const strategy = el('div', 'result-strategy');
    strategy.appendChild(el('h2', 'strategy-label', result.strategy.label));
    strategy.appendChild(el('p', 'strategy-description', result.strategy.description));
    strategy.appendChild(el('p', 'strategy-eu',
      `Expected utility under the matched profile: ${result.expected_utility.toFixed(4)}`));
    panel.appendChild(strategy);
    panel.appendChild(el('p', 'proto-caption', 'The matched utility profile:'));
    const chart = el('div', 'proto-chart');
    result.prototype_values.forEach((value, i) => {
      const row = el('div', 'proto-row');
      const label = model?.outcomes[i]?.label ?? `outcome ${i}`;
      row.appendChild(el('span', 'proto-label', label));
      const track = el('div', 'proto-track');
      const bar = el('div', 'proto-bar');
      bar.style.width = percent(value);
      bar.title = value.toFixed(3);
      track.appendChild(bar);
      row.appendChild(track);
      row.appendChild(el('span', 'proto-value', value.toFixed(2)));
      chart.appendChild(row);
    });
    panel.appendChild(chart);
    const again = el('button', 'btn-restart', 'Start over');
    again.addEventListener('click', () => this.restart());
    panel.appendChild(again);
    return panel;
  }
}
