"""REST service through which annotators rate generated explanations.

Endpoints (JSON unless noted):
  GET  /runs/{run}/next?annotator={id}        next unrated task, 204 when done
  POST /runs/{run}/ratings                    store a rating, 422 out of range
  GET  /runs/{run}/aggregate                  item + run means and correlation
  GET  /items/{item}/images/{before|after|concat}   PNG bytes

When a built rating console is available its static assets are served at /.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotation import (
    AnnotationRecord,
    AnnotationStore,
    NoRatings,
    ScoreOutOfRange,
    UnknownAnnotator,
    UnknownItem,
)
from .dataset import DatasetStore, load_pair
from .imaging import concat_side_by_side, encode_png


class RatingBody(BaseModel):
    item_id: str
    annotator_id: str
    truthfulness: int = Field(ge=1, le=5)
    informativeness: int = Field(ge=1, le=5)


def create_app(
    dataset_store: DatasetStore,
    records: Sequence,
    run_id: str,
    ledger_dir: str | Path,
    annotators: Sequence[str] | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Wire an annotation store and dataset into the rating API.

    With an explicit `annotators` list only those ids may rate; otherwise
    annotators are registered on first contact.
    """
    app = FastAPI(title="rating service")
    store = AnnotationStore(ledger_dir)
    store.enqueue_run(run_id, records)
    allowlist = set(annotators) if annotators else None
    if allowlist:
        for annotator_id in allowlist:
            store.register_annotator(annotator_id)
    app.state.annotation_store = store

    def resolve_annotator(annotator: str) -> None:
        if allowlist is None and not store.is_registered(annotator):
            store.register_annotator(annotator)

    @app.get("/runs/{run}/next")
    def next_task(run: str, annotator: str):
        resolve_annotator(annotator)
        try:
            task = store.next_item(run, annotator)
            done, total = store.progress(run, annotator)
        except UnknownAnnotator as exc:
            raise HTTPException(status_code=404, detail=f"unknown annotator: {exc}") from exc
        except UnknownItem as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        if task is None:
            return Response(status_code=204)
        return {
            "item_id": task.item_id,
            "image_before_url": f"/items/{task.item_id}/images/before",
            "image_after_url": f"/items/{task.item_id}/images/after",
            "explanation": task.explanation,
            "progress": {"done": done, "total": total},
        }

    @app.post("/runs/{run}/ratings")
    def submit_rating(run: str, body: RatingBody):
        if not body.item_id.startswith(f"{run}:"):
            raise HTTPException(status_code=404, detail=f"item {body.item_id!r} is not part of run {run!r}")
        resolve_annotator(body.annotator_id)
        try:
            record = store.submit_rating(
                AnnotationRecord(
                    item_id=body.item_id,
                    annotator_id=body.annotator_id,
                    truthfulness=body.truthfulness,
                    informativeness=body.informativeness,
                )
            )
        except ScoreOutOfRange as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except UnknownItem as exc:
            raise HTTPException(status_code=404, detail=f"unknown item: {exc}") from exc
        done, total = store.progress(run, body.annotator_id)
        return {"status": "stored", "submitted_at": record.submitted_at,
                "progress": {"done": done, "total": total}}

    @app.get("/runs/{run}/aggregate")
    def aggregate(run: str):
        try:
            result = store.aggregate_ratings(run)
        except NoRatings as exc:
            raise HTTPException(status_code=404, detail=f"no ratings for run: {exc}") from exc
        except UnknownItem as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {
            "items": [
                {
                    "item_id": item.item_id,
                    "mean_truthfulness": item.mean_truthfulness,
                    "mean_informativeness": item.mean_informativeness,
                    "n_annotators": item.n_annotators,
                }
                for item in result.items
            ],
            "run": {
                "mean_truthfulness": result.mean_truthfulness,
                "mean_informativeness": result.mean_informativeness,
                "n_items": result.n_items,
            },
            "pearson_r": result.pearson_r,
        }

    @app.get("/items/{item_id}/images/{kind}")
    def item_image(item_id: str, kind: str):
        if kind not in ("before", "after", "concat"):
            raise HTTPException(status_code=404, detail=f"unknown image kind {kind!r}")
        task = store._tasks_by_item.get(item_id)
        if task is None:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        try:
            pair = load_pair(dataset_store, task.pair_id)
        except Exception as exc:
            raise HTTPException(status_code=404, detail=f"pair unavailable: {exc}") from exc
        if kind == "before":
            raster = pair.image_before
        elif kind == "after":
            raster = pair.image_after
        else:
            raster = concat_side_by_side(pair.image_before, pair.image_after)
        return Response(content=encode_png(raster), media_type="image/png")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
