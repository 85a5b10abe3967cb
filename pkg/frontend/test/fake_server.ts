/**
 * In-memory stand-in for the rating service, speaking the same REST
 * dialect: next-task queue per annotator, 1..5 validation with 422,
 * last-write-wins ratings, aggregate with means and correlation.
 */

import { FetchLike } from '../src/api.js';

interface StoredRating {
  truthfulness: number;
  informativeness: number;
}

export class FakeAnnotationServer {
  readonly ratings = new Map<string, StoredRating>(); // `${item}|${annotator}`
  requestLog: string[] = [];
  failNextRequests = 0;

  constructor(
    readonly runId: string,
    readonly items: { item_id: string; explanation: string }[],
  ) {}

  get fetch(): FetchLike {
    return async (input, init) => this.handle(input, init);
  }

  private key(itemId: string, annotatorId: string): string {
    return `${itemId}|${annotatorId}`;
  }

  private progressFor(annotatorId: string): { done: number; total: number } {
    const done = this.items.filter((item) =>
      this.ratings.has(this.key(item.item_id, annotatorId)),
    ).length;
    return { done, total: this.items.length };
  }

  private async handle(input: string, init?: RequestInit): Promise<Response> {
    this.requestLog.push(`${init?.method ?? 'GET'} ${input}`);
    if (this.failNextRequests > 0) {
      this.failNextRequests -= 1;
      throw new TypeError('fetch failed (injected)');
    }
    const url = new URL(input, 'http://fake.test');
    const nextMatch = url.pathname.match(/^\/runs\/([^/]+)\/next$/);
    if (nextMatch && (init?.method ?? 'GET') === 'GET') {
      return this.next(decodeURIComponent(nextMatch[1]), url.searchParams.get('annotator') ?? '');
    }
    const ratingsMatch = url.pathname.match(/^\/runs\/([^/]+)\/ratings$/);
    if (ratingsMatch && init?.method === 'POST') {
      return this.store(decodeURIComponent(ratingsMatch[1]), JSON.parse(String(init.body)));
    }
    const aggregateMatch = url.pathname.match(/^\/runs\/([^/]+)\/aggregate$/);
    if (aggregateMatch && (init?.method ?? 'GET') === 'GET') {
      return this.aggregate(decodeURIComponent(aggregateMatch[1]));
    }
    return json(404, { detail: `no route for ${url.pathname}` });
  }

  private next(runId: string, annotatorId: string): Response {
    if (runId !== this.runId) return json(404, { detail: `unknown run ${runId}` });
    const pending = this.items.find(
      (item) => !this.ratings.has(this.key(item.item_id, annotatorId)),
    );
    if (!pending) return new Response(null, { status: 204 });
    return json(200, {
      item_id: pending.item_id,
      image_before_url: `/items/${pending.item_id}/images/before`,
      image_after_url: `/items/${pending.item_id}/images/after`,
      explanation: pending.explanation,
      progress: this.progressFor(annotatorId),
    });
  }

  private store(
    runId: string,
    body: {
      item_id: string;
      annotator_id: string;
      truthfulness: unknown;
      informativeness: unknown;
    },
  ): Response {
    if (runId !== this.runId) return json(404, { detail: `unknown run ${runId}` });
    for (const score of [body.truthfulness, body.informativeness]) {
      if (typeof score !== 'number' || !Number.isInteger(score) || score < 1 || score > 5) {
        return json(422, { detail: `score out of range: ${String(score)}` });
      }
    }
    if (!this.items.some((item) => item.item_id === body.item_id)) {
      return json(404, { detail: `unknown item ${body.item_id}` });
    }
    this.ratings.set(this.key(body.item_id, body.annotator_id), {
      truthfulness: body.truthfulness as number,
      informativeness: body.informativeness as number,
    });
    return json(200, { status: 'stored', progress: this.progressFor(body.annotator_id) });
  }

  private aggregate(runId: string): Response {
    if (runId !== this.runId) return json(404, { detail: `unknown run ${runId}` });
    const items = [];
    for (const item of [...this.items].sort((a, b) => a.item_id.localeCompare(b.item_id))) {
      const scores = [];
      for (const [key, rating] of this.ratings) {
        if (key.startsWith(`${item.item_id}|`)) scores.push(rating);
      }
      if (!scores.length) continue;
      items.push({
        item_id: item.item_id,
        mean_truthfulness: mean(scores.map((s) => s.truthfulness)),
        mean_informativeness: mean(scores.map((s) => s.informativeness)),
        n_annotators: scores.length,
      });
    }
    if (!items.length) return json(404, { detail: 'no ratings' });
    const truth = items.map((i) => i.mean_truthfulness);
    const info = items.map((i) => i.mean_informativeness);
    return json(200, {
      items,
      run: {
        mean_truthfulness: mean(truth),
        mean_informativeness: mean(info),
        n_items: items.length,
      },
      pearson_r: pearsonOrNull(truth, info),
    });
  }
}

function json(status: number, body: unknown): Response {

  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

function pearsonOrNull(xs: number[], ys: number[]): number | null {
  if (xs.length < 2) return null;
  const mx = mean(xs);
  const my = mean(ys);
  const dx = xs.map((x) => x - mx);
  const dy = ys.map((y) => y - my);
  const sxx = dx.reduce((a, d) => a + d * d, 0);
  const syy = dy.reduce((a, d) => a + d * d, 0);
  const denom = Math.sqrt(sxx) * Math.sqrt(syy);
  if (denom === 0) return null;
  const sxy = dx.reduce((a, d, i) => a + d * dy[i], 0);
  return sxy / denom;
}
