/**
 * Console state machine, deliberately DOM-free.
 *
 * Invariants: submit stays disabled until both scores are chosen; a score
 * outside 1..5 is never accepted into the state; validation or network
 * failures keep the chosen scores so nothing is lost on retry. Progress is
 * whatever the server reports, so a page reload resumes exactly where the
 * server says.
 */
import { ApiError, isValidScore, } from './api.js';
const INITIAL_STATE = {
    phase: 'idle',
    task: null,
    scores: { truthfulness: null, informativeness: null },
    progress: { done: 0, total: 0 },
    banner: null,
    summary: null,
};
export class ConsoleSession {
    api;
    runId;
    annotatorId;
    state = { ...INITIAL_STATE };
    listeners = [];
    lastFailedAction = null;
    constructor(api, runId, annotatorId) {
        this.api = api;
        this.runId = runId;
        this.annotatorId = annotatorId;
    }
    getState() {
        return this.state;
    }
    subscribe(listener) {
        this.listeners.push(listener);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }
    update(partial) {
        this.state = { ...this.state, ...partial };
        for (const listener of this.listeners)
            listener(this.state);
    }
    /** Ask the server for the next task; call once on page load. */
    async start() {
        await this.loadNext();
    }
    async loadNext() {
        this.update({ phase: 'loading', banner: null });
        let task;
        try {
            task = await this.api.nextTask(this.runId, this.annotatorId);
        }
        catch (error) {
            this.lastFailedAction = 'load';
            this.update({ phase: 'error', banner: describe(error) });
            return;
        }
        this.lastFailedAction = null;
        if (task === null) {
            let summary = null;
            try {
                summary = await this.api.aggregate(this.runId);
            }
            catch {
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
    setScore(dimension, value) {
        if (this.state.phase !== 'rating' || !isValidScore(value))
            return;
        this.update({ scores: { ...this.state.scores, [dimension]: value } });
    }
    canSubmit() {
        return (this.state.phase === 'rating' &&
            isValidScore(this.state.scores.truthfulness) &&
            isValidScore(this.state.scores.informativeness));
    }
    /** POST the pending scores; on success advance to the next task. */
    async submit() {
        if (!this.canSubmit() || this.state.task === null)
            return;
        const task = this.state.task;
        const scores = this.state.scores;
        this.update({ phase: 'submitting', banner: null });
        try {
            const outcome = await this.api.submitRating(this.runId, {
                item_id: task.item_id,
                annotator_id: this.annotatorId,
                truthfulness: scores.truthfulness,
                informativeness: scores.informativeness,
            });
            if (outcome.kind === 'rejected') {
                this.update({ phase: 'rating', banner: outcome.detail });
                return;
            }
            this.lastFailedAction = null;
            this.update({ progress: outcome.progress });
            await this.loadNext();
        }
        catch (error) {
            // Network failure: keep the scores locally and offer a retry.
            this.lastFailedAction = 'submit';
            this.update({
                phase: 'rating',
                banner: `${describe(error)}; your scores are kept, retry when ready`,
            });
        }
    }
    /** Re-run whichever request failed last. */
    async retry() {
        if (this.lastFailedAction === 'submit') {
            await this.submit();
        }
        else {
            await this.loadNext();
        }
    }
}
function describe(error) {
    if (error instanceof ApiError)
        return error.message;
    if (error instanceof Error)
        return `network error: ${error.message}`;
    return 'network error';
}
