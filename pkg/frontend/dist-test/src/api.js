/**
 * Typed client for the rating service REST API.
 *
 * The fetch implementation is injectable so the console logic can run
 * against an in-memory server in tests.
 */
export class ApiError extends Error {
    status;
    constructor(message, status) {
        super(message);
        this.status = status;
        this.name = 'ApiError';
    }
}
export function isValidScore(value) {
    return typeof value === 'number' && Number.isInteger(value) && value >= 1 && value <= 5;
}
export class RatingApi {
    baseUrl;
    fetchImpl;
    constructor(baseUrl = '', fetchImpl = (input, init) => fetch(input, init)) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
    }
    url(path) {
        return this.baseUrl.replace(/\/+$/, '') + path;
    }
    /** Next unrated task for the annotator, or null when the run is done. */
    async nextTask(runId, annotatorId) {
        const response = await this.fetchImpl(this.url(`/runs/${encodeURIComponent(runId)}/next?annotator=${encodeURIComponent(annotatorId)}`));
        if (response.status === 204)
            return null;
        if (!response.ok) {
            throw new ApiError(`could not fetch the next task (HTTP ${response.status})`, response.status);
        }
        return (await response.json());
    }
    /**
     * Store one rating. Scores outside 1..5 never leave the client; the
     * server's own range check answers 422 and is surfaced as `rejected`.
     */
    async submitRating(runId, rating) {
        if (!isValidScore(rating.truthfulness) || !isValidScore(rating.informativeness)) {
            throw new ApiError('scores must be integers between 1 and 5');
        }
        const response = await this.fetchImpl(this.url(`/runs/${encodeURIComponent(runId)}/ratings`), {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(rating),
        });
        if (response.ok) {
            const body = (await response.json());
            return { kind: 'stored', progress: body.progress };
        }
        if (response.status === 422) {
            let detail = 'the server rejected the rating';
            try {
                const body = (await response.json());
                if (body.detail)
                    detail = JSON.stringify(body.detail);
            }
            catch {
                // keep the generic detail
            }
            return { kind: 'rejected', status: 422, detail };
        }
        throw new ApiError(`rating submission failed (HTTP ${response.status})`, response.status);
    }
    async aggregate(runId) {
        const response = await this.fetchImpl(this.url(`/runs/${encodeURIComponent(runId)}/aggregate`));
        if (!response.ok) {
            throw new ApiError(`could not fetch the run summary (HTTP ${response.status})`, response.status);
        }
        return (await response.json());
    }
}
