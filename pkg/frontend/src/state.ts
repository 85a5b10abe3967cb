/**
 * Console state machine, deliberately DOM-free.
 *
 * Invariants: submit stays disabled until both scores are chosen; a score
 * outside 1..5 is never accepted into the state; validation or network
 * failures keep the chosen scores so nothing is lost on retry. Progress is
 * whatever the server reports, so a page reload resumes exactly where the
 * server says.
 */

import {
  ApiError,
  isValidScore,
  RatingApi,
  RunAggregate,
  TaskPayload,
} from './api.js';

export type Dimension = 'truthfulness' | 'informativeness';

export type Phase = 'idle' | 'loading' | 'rating' | 'submitting' | 'complete' | 'error';

export interface PendingScores {
  truthfulness: number | null;
  informativeness: number | null;
}

export interface ConsoleState {
  phase: Phase;
  task: TaskPayload | null;
  scores: PendingScores;
  progress: { done: number; total: number };
  banner: string | null;
  summary: RunAggregate | null;
}

type Listener = (state: ConsoleState) => void;

const INITIAL_STATE: ConsoleState = {
  phase: 'idle',
  task: null,
  scores: { truthfulness: null, informativeness: null },
  progress: { done: 0, total: 0 },
  banner: null,
  summary: null,
};

export class ConsoleSession {
  private state: ConsoleState = { ...INITIAL_STATE };
  private listeners: Listener[] = [];
  private lastFailedAction: 'load' | 'submit' | null = null;

  constructor(
    private readonly api: RatingApi,
    readonly runId: string,
    readonly annotatorId: string,
  ) {}

  getState(): ConsoleState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(partial: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Ask the server for the next task; call once on page load. */
  async start(): Promise<void> {
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    this.update({ phase: 'loading', banner: null });
    let task: TaskPayload | null;
    try {
      task = await this.api.nextTask(this.runId, this.annotatorId);
    } catch (error) {
      this.lastFailedAction = 'load';
      this.update({ phase: 'error', banner: describe(error) });
      return;
    }
    this.lastFailedAction = null;
    if (task === null) {
      let summary: RunAggregate | null = null;
      try {
        summary = await this.api.aggregate(this.runId);
      } catch {
        summary = null; // completion screen still renders without a summary
      }
      this.update({ phase: 'complete', task: null, summary });
      return;
    }
    this.update({
      phase: 'rating',
      task,
      scores: { truthfulness: null, informativeness: null },
      progress: task.progress,
      banner: null,
    });
  }

  /** Record a score choice; values outside 1..5 are ignored. */
  setScore(dimension: Dimension, value: number): void {
    if (this.state.phase !== 'rating' || !isValidScore(value)) return;
    this.update({ scores: { ...this.state.scores, [dimension]: value } });
  }

  canSubmit(): boolean {
    return (
      this.state.phase === 'rating' &&
      isValidScore(this.state.scores.truthfulness) &&
      isValidScore(this.state.scores.informativeness)
    );
  }

  /** POST the pending scores; on success advance to the next task. */
  async submit(): Promise<void> {
    if (!this.canSubmit() || this.state.task === null) return;
    const task = this.state.task;
    const scores = this.state.scores;
    this.update({ phase: 'submitting', banner: null });
    try {
      const outcome = await this.api.submitRating(this.runId, {
        item_id: task.item_id,
        annotator_id: this.annotatorId,
        truthfulness: scores.truthfulness as number,
        informativeness: scores.informativeness as number,
      });
      if (outcome.kind === 'rejected') {
        this.update({ phase: 'rating', banner: outcome.detail });
        return;
      }
      this.lastFailedAction = null;
      this.update({ progress: outcome.progress });
      await this.loadNext();
    } catch (error) {
      // Network failure: keep the scores locally and offer a retry.
      this.lastFailedAction = 'submit';
      this.update({
        phase: 'rating',
        banner: `${describe(error)}; your scores are kept, retry when ready`,
      });
    }
  }

  /** Re-run whichever request failed last. */
  async retry(): Promise<void> {
    if (this.lastFailedAction === 'submit') {
      await this.submit();
    } else {
      await this.loadNext();
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  if (error instanceof Error) return `network error: ${error.message}`;
  return 'network error';
}
