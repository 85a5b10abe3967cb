/**
 * Typed client for the rating service REST API.
 *
 * The fetch implementation is injectable so the console logic can run
 * against an in-memory server in tests.
 */

export interface Progress {
  done: number;
  total: number;
}

export interface TaskPayload {
  item_id: string;
  image_before_url: string;
  image_after_url: string;
  explanation: string;
  progress: Progress;
}

export interface RunAggregate {
  items: {
    item_id: string;
    mean_truthfulness: number;
    mean_informativeness: number;
    n_annotators: number;
  }[];
  run: {
    mean_truthfulness: number;
    mean_informativeness: number;
    n_items: number;
  };
  pearson_r: number | null;
}

export interface RatingSubmission {
  item_id: string;
  annotator_id: string;
  truthfulness: number;
  informativeness: number;
}

export type SubmitOutcome =
  | { kind: 'stored'; progress: Progress }
  | { kind: 'rejected'; status: number; detail: string };

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = 'ApiError';
  }
}

export function isValidScore(value: unknown): value is 1 | 2 | 3 | 4 | 5 {
  return typeof value === 'number' && Number.isInteger(value) && value >= 1 && value <= 5;
}

export class RatingApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, '') + path;
  }

  /** Next unrated task for the annotator, or null when the run is done. */
  async nextTask(runId: string, annotatorId: string): Promise<TaskPayload | null> {
    const response = await this.fetchImpl(
      this.url(
        `/runs/${encodeURIComponent(runId)}/next?annotator=${encodeURIComponent(annotatorId)}`,
      ),
    );
    if (response.status === 204) return null;
    if (!response.ok) {
      throw new ApiError(`could not fetch the next task (HTTP ${response.status})`, response.status);
    }
    return (await response.json()) as TaskPayload;
  }

  /**
   * Store one rating. Scores outside 1..5 never leave the client; the
   * server's own range check answers 422 and is surfaced as `rejected`.
   */
  async submitRating(runId: string, rating: RatingSubmission): Promise<SubmitOutcome> {
    if (!isValidScore(rating.truthfulness) || !isValidScore(rating.informativeness)) {
      throw new ApiError('scores must be integers between 1 and 5');
    }
    const response = await this.fetchImpl(this.url(`/runs/${encodeURIComponent(runId)}/ratings`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(rating),
    });
    if (response.ok) {
      const body = (await response.json()) as { progress: Progress };
      return { kind: 'stored', progress: body.progress };
    }
    if (response.status === 422) {
      let detail = 'the server rejected the rating';
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body.detail) detail = JSON.stringify(body.detail);
      } catch {
        // keep the generic detail
      }
      return { kind: 'rejected', status: 422, detail };
    }
    throw new ApiError(`rating submission failed (HTTP ${response.status})`, response.status);
  }

  async aggregate(runId: string): Promise<RunAggregate> {
    const response = await this.fetchImpl(
      this.url(`/runs/${encodeURIComponent(runId)}/aggregate`),
    );
    if (!response.ok) {
      throw new ApiError(`could not fetch the run summary (HTTP ${response.status})`, response.status);
    }
    return (await response.json()) as RunAggregate;
  }
}
