from __future__ import annotations

import csv
import io

import pytest

from narrator.metrics import MetricReport, MetricRow
from narrator.report import EmptyReport, ResultsRow, emit, parse_rows, results_table

# Published comparison values used purely as rendering fixtures.
LLAVA_FIXTURE_ROWS = [
    ResultsRow("All-at-Once", "LLaVA-1.5", 22.53, 2.82, 2.34, 53.52),
    ResultsRow("Step-by-Step", "LLaVA-1.5 → LLaVA-1.5", 25.66, 3.12, 2.62, 54.13),
    ResultsRow("Hybrid", "LLaVA-1.5 → LLaVA-1.5", 28.13, 2.85, 3.09, 75.48),
]


def metric_report() -> MetricReport:
    return MetricReport(
        rows=(
            MetricRow("all-at-once", "LLaVA-1.5", 22.53, 53.52, 100),
            MetricRow("step-by-step", "LLaVA-1.5 → LLaVA-1.5", 25.66, 54.13, 100),
            MetricRow("hybrid", "LLaVA-1.5 → LLaVA-1.5", 28.13, 75.48, 100),
        )
    )


def test_results_table_joins_ratings():
    ratings = {
        ("all-at-once", "LLaVA-1.5"): (2.82, 2.34),
        ("step-by-step", "LLaVA-1.5 → LLaVA-1.5"): (3.12, 2.62),
        ("hybrid", "LLaVA-1.5 → LLaVA-1.5"): (2.85, 3.09),
    }
    rows = results_table(metric_report(), ratings)
    assert rows == LLAVA_FIXTURE_ROWS


def test_results_table_without_ratings_leaves_cells_absent():
    rows = results_table(metric_report())
    assert all(row.truthfulness is None and row.informativeness is None for row in rows)


def test_results_table_single_row():
    report = MetricReport(rows=(MetricRow("hybrid", "vlm → vlm", 10.0, 40.0, 1),))
    (row,) = results_table(report)
    assert row.prompting == "Hybrid"


def test_results_table_empty_report():
    with pytest.raises(EmptyReport):
        results_table(MetricReport(rows=()))


def test_fixture_rows_render_expected_cells():
    rendered = emit(LLAVA_FIXTURE_ROWS, format="csv")
    reader = csv.reader(io.StringIO(rendered))
    header = next(reader)
    assert header == ["prompting", "model_chain", "coverage_pct", "truthfulness",
                      "informativeness", "avg_words"]
    body = list(reader)
    assert body[0] == ["All-at-Once", "LLaVA-1.5", "22.53", "2.82", "2.34", "53.52"]
    assert body[1] == ["Step-by-Step", "LLaVA-1.5 → LLaVA-1.5", "25.66", "3.12", "2.62", "54.13"]
    assert body[2] == ["Hybrid", "LLaVA-1.5 → LLaVA-1.5", "28.13", "2.85", "3.09", "75.48"]


def test_emit_is_deterministic():
    assert emit(LLAVA_FIXTURE_ROWS, "csv") == emit(LLAVA_FIXTURE_ROWS, "csv")
    assert emit(LLAVA_FIXTURE_ROWS, "plain-table") == emit(LLAVA_FIXTURE_ROWS, "plain-table")


def test_two_decimal_rendering_rules():
    row = ResultsRow("Hybrid", "m", 25.663, None, None, 0.125)
    rendered = emit([row], "csv")
    cells = rendered.splitlines()[1].split(",")
    assert cells[2] == "25.66"
    # Ties go to even: 0.125 is exactly representable and rounds down.
    assert cells[5] == "0.12"
    assert cells[3] == "" and cells[4] == ""


def test_json_round_trips_to_equal_rows():
    document = emit(LLAVA_FIXTURE_ROWS, "json")
    assert parse_rows(document) == LLAVA_FIXTURE_ROWS


def test_plain_table_layout():
    rendered = emit(LLAVA_FIXTURE_ROWS, "plain-table")
    lines = rendered.splitlines()
    assert lines[0].split()[:2] == ["prompting", "model_chain"]
    assert "22.53" in lines[2]
    assert lines[2].startswith("All-at-Once")
    # Absent ratings render as dashes.
    dashless = emit(results_table(metric_report()), "plain-table")
    assert " - " in dashless or dashless.rstrip().endswith("-") or "-" in dashless.splitlines()[2]


def test_plain_table_parses_back_to_values():
    rendered = emit(LLAVA_FIXTURE_ROWS, "plain-table")
    data_lines = rendered.splitlines()[2:]
    for line, row in zip(data_lines, LLAVA_FIXTURE_ROWS):
        numbers = line.split()[-4:]
        assert numbers == [
            f"{row.coverage_pct:.2f}",
            f"{row.truthfulness:.2f}",
            f"{row.informativeness:.2f}",
            f"{row.avg_words:.2f}",
        ]


def test_row_validation():
    with pytest.raises(ValueError):
        ResultsRow("Hybrid", "m", 101.0, None, None, 10.0)
    with pytest.raises(ValueError):
        ResultsRow("Hybrid", "m", 50.0, 0.5, None, 10.0)


def test_emit_rejects_unknown_format_and_empty_rows():
    with pytest.raises(ValueError):
        emit(LLAVA_FIXTURE_ROWS, "yaml")
    with pytest.raises(EmptyReport):
        emit([], "csv")
