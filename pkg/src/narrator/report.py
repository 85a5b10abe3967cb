"""Join automatic metrics with human rating aggregates into a results table
and serialize it as aligned text, CSV, or JSON.

Plain-table and CSV cells carry exactly two decimals (round-half-even);
JSON keeps full-precision values so a parse round-trips to equal rows.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from .metrics import MetricReport

_STRATEGY_LABELS = {
    "all-at-once": "All-at-Once",
    "step-by-step": "Step-by-Step",
    "hybrid": "Hybrid",
}

_FORMATS = ("plain-table", "csv", "json")


class EmptyReport(Exception):
    """A results table was requested over no rows."""


@dataclass(frozen=True)
class ResultsRow:
    prompting: str
    model_chain: str
    coverage_pct: float
    truthfulness: float | None
    informativeness: float | None
    avg_words: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.coverage_pct <= 100.0:
            raise ValueError(f"coverage_pct {self.coverage_pct} outside [0, 100]")
        for label, value in (("truthfulness", self.truthfulness),
                             ("informativeness", self.informativeness)):
            if value is not None and not 1.0 <= value <= 5.0:
                raise ValueError(f"{label} {value} outside [1, 5]")


def strategy_label(strategy: str) -> str:
    return _STRATEGY_LABELS.get(strategy, strategy)


def results_table(
    metric_report: MetricReport,
    ratings_by_group: dict[tuple[str, str], tuple[float, float]] | None = None,
) -> list[ResultsRow]:
    """One row per (strategy, model chain) group, metric rows ordered as
    aggregated; rating cells stay absent for groups without annotations."""
    if not metric_report.rows:
        raise EmptyReport("metric report has no rows")
    ratings = ratings_by_group or {}
    rows = []
    for metric_row in metric_report.rows:
        rating = ratings.get((metric_row.strategy, metric_row.model_chain))
        rows.append(
            ResultsRow(
                prompting=strategy_label(metric_row.strategy),
                model_chain=metric_row.model_chain,
                coverage_pct=metric_row.mean_coverage_pct,
                truthfulness=rating[0] if rating else None,
                informativeness=rating[1] if rating else None,
                avg_words=metric_row.mean_word_count,
            )
        )
    return rows


def _two_decimals(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def emit(rows: list[ResultsRow], format: str = "plain-table") -> str:
    """Deterministic serialization of the results rows."""
    if not rows:
        raise EmptyReport("no rows to emit")
    if format not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {format!r}")
    if format == "json":
        return json.dumps(
            [
                {
                    "prompting": row.prompting,
                    "model_chain": row.model_chain,
                    "coverage_pct": row.coverage_pct,
                    "truthfulness": row.truthfulness,
                    "informativeness": row.informativeness,
                    "avg_words": row.avg_words,
                }
                for row in rows
            ],
            ensure_ascii=False,
            indent=2,
        ) + "\n"

    header = ["prompting", "model_chain", "coverage_pct", "truthfulness",
              "informativeness", "avg_words"]
    table = [
        [
            row.prompting,
            row.model_chain,
            _two_decimals(row.coverage_pct),
            _two_decimals(row.truthfulness),
            _two_decimals(row.informativeness),
            _two_decimals(row.avg_words),
        ]
        for row in rows
    ]
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(table)
        return buffer.getvalue()

    cells = [header] + [
        [c if c else "-" for c in line] for line in table
    ]
    widths = [max(len(line[i]) for line in cells) for i in range(len(header))]
    rendered = []
    for line_index, line in enumerate(cells):
        left = [line[i].ljust(widths[i]) for i in range(2)]
        right = [line[i].rjust(widths[i]) for i in range(2, len(header))]
        rendered.append("  ".join(left + right).rstrip())
        if line_index == 0:
            rendered.append("  ".join("-" * w for w in widths))
    return "\n".join(rendered) + "\n"


def parse_rows(json_document: str) -> list[ResultsRow]:
    """Inverse of emit(..., format="json")."""
    return [
        ResultsRow(
            prompting=item["prompting"],
            model_chain=item["model_chain"],
            coverage_pct=item["coverage_pct"],
            truthfulness=item["truthfulness"],
            informativeness=item["informativeness"],
            avg_words=item["avg_words"],
        )
        for item in json.loads(json_document)
    ]
