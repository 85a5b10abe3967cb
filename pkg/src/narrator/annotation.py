"""Human rating storage and aggregation.

Ratings (1-5 truthfulness and informativeness per item and annotator) land
in an append-only JSONL ledger per run; the in-memory view is the
last-write-wins compaction of that ledger. Aggregation is a pure function
of the stored record set: per-item means across annotators, run means
across items, and the correlation between the two rating dimensions.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .metrics import DegenerateSeries, pearson

VALID_SCORES = (1, 2, 3, 4, 5)


class DuplicateRun(Exception):
    """The run id is already enqueued in this store."""


class UnknownAnnotator(Exception):
    """The annotator id is not registered."""


class UnknownItem(Exception):
    """No task exists for the referenced item id."""


class ScoreOutOfRange(Exception):
    """A rating outside 1..5 reached the persistence boundary."""


class NoRatings(Exception):
    """Aggregation was requested before any rating arrived."""


def item_id_for(run_id: str, pair_id: str) -> str:
    return f"{run_id}:{pair_id}"


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's two scores for one item."""

    item_id: str
    annotator_id: str
    truthfulness: int
    informativeness: int
    submitted_at: str = ""

    def __post_init__(self) -> None:
        for label, score in (("truthfulness", self.truthfulness),
                             ("informativeness", self.informativeness)):
            if not isinstance(score, int) or score not in VALID_SCORES:
                raise ScoreOutOfRange(f"{label} must be an integer in 1..5, got {score!r}")


@dataclass(frozen=True)
class Task:
    item_id: str
    run_id: str
    pair_id: str
    explanation: str
    order: int


@dataclass(frozen=True)
class RatingAggregate:
    item_id: str
    mean_truthfulness: float
    mean_informativeness: float
    n_annotators: int


@dataclass(frozen=True)
class RunAggregate:
    items: tuple[RatingAggregate, ...]
    mean_truthfulness: float
    mean_informativeness: float
    n_items: int
    pearson_r: float | None


class AnnotationStore:
    """Task queue plus rating ledger for one or more runs."""

    def __init__(self, ledger_dir: str | Path):
        self.ledger_dir = Path(ledger_dir)
        self.ledger_dir.mkdir(parents=True, exist_ok=True)
        self._runs: dict[str, list[Task]] = {}
        self._tasks_by_item: dict[str, Task] = {}
        self._ratings: dict[tuple[str, str], AnnotationRecord] = {}
        self._annotators: set[str] = set()
        self._write_lock = threading.Lock()

    # -- registration and queueing --

    def register_annotator(self, annotator_id: str) -> None:
        self._annotators.add(annotator_id)

    def is_registered(self, annotator_id: str) -> bool:
        return annotator_id in self._annotators

    def _ledger_path(self, run_id: str) -> Path:
        return self.ledger_dir / f"ratings-{run_id}.jsonl"

    def enqueue_run(self, run_id: str, records: Sequence) -> list[Task]:
        """Create one pending task per generation record, ordered by pair id.

        Any ledger already on disk for this run is replayed so that rating
        work resumes where it stopped.
        """
        if ":" in run_id or "/" in run_id:
            raise ValueError(f"run id must not contain ':' or '/', got {run_id!r}")
        if run_id in self._runs:
            raise DuplicateRun(run_id)
        if not records:
            raise ValueError("cannot enqueue an empty run")
        tasks = [
            Task(
                item_id=item_id_for(run_id, record.pair_id),
                run_id=run_id,
                pair_id=record.pair_id,
                explanation=record.explanation,
                order=index,
            )
            for index, record in enumerate(sorted(records, key=lambda r: r.pair_id))
        ]
        self._runs[run_id] = tasks
        for task in tasks:
            self._tasks_by_item[task.item_id] = task
        self._replay_ledger(run_id)
        return tasks

    def _replay_ledger(self, run_id: str) -> None:
        path = self._ledger_path(run_id)
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            record = AnnotationRecord(
                item_id=data["item_id"],
                annotator_id=data["annotator_id"],
                truthfulness=data["truthfulness"],
                informativeness=data["informativeness"],
                submitted_at=data.get("submitted_at", ""),
            )
            if record.item_id in self._tasks_by_item:
                self._ratings[(record.item_id, record.annotator_id)] = record
                self._annotators.add(record.annotator_id)

    def tasks(self, run_id: str) -> list[Task]:
        if run_id not in self._runs:
            raise UnknownItem(f"run {run_id!r} is not enqueued")
        return list(self._runs[run_id])

    # -- annotator workflow --

    def next_item(self, run_id: str, annotator_id: str) -> Task | None:
        """The lowest-ordered task this annotator has not rated yet."""
        if not self.is_registered(annotator_id):
            raise UnknownAnnotator(annotator_id)
        for task in self.tasks(run_id):
            if (task.item_id, annotator_id) not in self._ratings:
                return task
        return None

    def progress(self, run_id: str, annotator_id: str) -> tuple[int, int]:
        tasks = self.tasks(run_id)
        done = sum(1 for t in tasks if (t.item_id, annotator_id) in self._ratings)
        return done, len(tasks)

    def submit_rating(self, record: AnnotationRecord) -> AnnotationRecord:
        """Persist one rating; resubmission by the same annotator overwrites."""
        task = self._tasks_by_item.get(record.item_id)
        if task is None:
            raise UnknownItem(record.item_id)
        if not record.submitted_at:
            record = AnnotationRecord(
                item_id=record.item_id,
                annotator_id=record.annotator_id,
                truthfulness=record.truthfulness,
                informativeness=record.informativeness,
                submitted_at=datetime.now(timezone.utc).isoformat(),
            )
        self._annotators.add(record.annotator_id)
        line = json.dumps(
            {
                "item_id": record.item_id,
                "annotator_id": record.annotator_id,
                "truthfulness": record.truthfulness,
                "informativeness": record.informativeness,
                "submitted_at": record.submitted_at,
            },
            ensure_ascii=False,
        )
        with self._write_lock:
            with self._ledger_path(task.run_id).open("a", encoding="utf-8") as ledger:
                ledger.write(line + "\n")
                ledger.flush()
            self._ratings[(record.item_id, record.annotator_id)] = record
        return record

    def compact(self, run_id: str) -> int:
        """Rewrite the run's ledger to its last-write-wins state."""
        tasks = self.tasks(run_id)
        surviving = [
            self._ratings[(task.item_id, annotator)]
            for task in tasks
            for annotator in sorted(self._annotators)
            if (task.item_id, annotator) in self._ratings
        ]
        path = self._ledger_path(run_id)
        temp = path.with_suffix(".jsonl.tmp")
        with self._write_lock:
            with temp.open("w", encoding="utf-8") as out:
                for record in surviving:
                    out.write(
                        json.dumps(
                            {
                                "item_id": record.item_id,
                                "annotator_id": record.annotator_id,
                                "truthfulness": record.truthfulness,
                                "informativeness": record.informativeness,
                                "submitted_at": record.submitted_at,
                            },
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
            temp.replace(path)
        return len(surviving)

    # -- aggregation --

    def aggregate_ratings(self, run_id: str) -> RunAggregate:
        """Per-item means across annotators and run-level means of those."""
        tasks = self.tasks(run_id)
        items: list[RatingAggregate] = []
        for task in sorted(tasks, key=lambda t: t.item_id):
            records = [
                self._ratings[(task.item_id, annotator)]
                for annotator in sorted(self._annotators)
                if (task.item_id, annotator) in self._ratings
            ]
            if not records:
                continue
            items.append(
                RatingAggregate(
                    item_id=task.item_id,
                    mean_truthfulness=sum(r.truthfulness for r in records) / len(records),
                    mean_informativeness=sum(r.informativeness for r in records) / len(records),
                    n_annotators=len(records),
                )
            )
        if not items:
            raise NoRatings(run_id)
        truth_series = [item.mean_truthfulness for item in items]
        info_series = [item.mean_informativeness for item in items]
        try:
            r = pearson(truth_series, info_series)
        except DegenerateSeries:
            r = None
        return RunAggregate(
            items=tuple(items),
            mean_truthfulness=sum(truth_series) / len(items),
            mean_informativeness=sum(info_series) / len(items),
            n_items=len(items),
            pearson_r=r,
        )
