"""Command-line entry point: ingest a corpus, run a generation strategy
over sampled pairs, score the outputs, serve the rating workflow, and
render results tables.

Exit codes: 0 success, 1 configuration error, 2 partial failure (some pairs
errored but the run completed).
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .annotation import item_id_for
from .backend import BackendSpec, ResponseCache
from .dataset import (
    DatasetStore,
    import_corpus,
    levircc_to_manifest,
    load_pair,
    sample_pairs,
    store_digest,
)
from .metrics import (
    DEFAULT_STOPWORDS,
    MetricReport,
    MetricRow,
    aggregate,
    coverage,
    default_tagger,
    load_stopwords,
    model_chain,
)
from .prompting import GenerationRecord, Strategy, build_plan, execute
from .report import emit, results_table

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


class ConfigError(Exception):
    """The run configuration is unusable."""


@dataclass(frozen=True)
class RunConfig:
    store: str
    strategy: str
    captioner: str
    composer: str
    n: int = 100
    seed: int = 0
    split: str = "test"
    cache: str | None = None
    parallelism: int = 1
    out: str = "records.jsonl"

    def __post_init__(self) -> None:
        if self.strategy not in tuple(s.value for s in Strategy):
            raise ConfigError(f"strategy must be one of "
                              f"{[s.value for s in Strategy]}, got {self.strategy!r}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")


def load_config(path: str | Path) -> tuple[dict[str, BackendSpec], dict]:
    """Parse a TOML config into backend specs and raw run settings."""
    try:
        with open(path, "rb") as handle:
            document = tomllib.load(handle)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    backends = {}
    for name, fields in document.get("backends", {}).items():
        try:
            backends[name] = BackendSpec(
                name=name,
                endpoint_url=fields["endpoint_url"],
                model_id=fields["model_id"],
                supports_images=bool(fields["supports_images"]),
                temperature=float(fields.get("temperature", 0.0)),
                max_output_tokens=int(fields.get("max_output_tokens", 512)),
                timeout=float(fields.get("timeout", 60.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: backend {name!r}: {exc}") from exc
    return backends, document.get("run", {})


def serialize_config(backends: dict[str, BackendSpec], run: RunConfig) -> dict:
    """Semantic view of a parsed config (round-trip check helper)."""
    return {
        "backends": {
            name: {k: v for k, v in asdict(spec).items() if k != "name"}
            for name, spec in sorted(backends.items())
        },
        "run": asdict(run),
    }


def read_records(path: str | Path) -> tuple[list[GenerationRecord], list[dict]]:
    """Read a run's JSONL output; error markers come back separately."""
    records, errors = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        if "error" in data:
            errors.append(data)
        else:
            records.append(GenerationRecord.from_json_dict(data))
    return records, errors


@click.group()
def main() -> None:
    """Generate and evaluate temporal-change explanations for before/after
    satellite image pairs."""


@main.command("ingest")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--images-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--store", "store_out", required=True, type=click.Path(file_okay=False))
def cmd_ingest(manifest: str, images_root: str, store_out: str) -> None:
    """Import a manifest + images into a dataset store."""
    try:
        store = import_corpus(manifest, images_root, store_out)
    except Exception as exc:
        click.echo(f"ingest failed: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    by_split: dict[str, int] = {}
    for entry in store.entries.values():
        by_split[entry.split] = by_split.get(entry.split, 0) + 1
    click.echo(f"imported {len(store)} pairs "
               f"({', '.join(f'{k}: {v}' for k, v in sorted(by_split.items()))})")
    click.echo(f"store digest: {store_digest(store)}")


@main.command("convert-levircc")
@click.option("--captions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_convert_levircc(captions: str, out: str) -> None:
    """Convert an upstream caption file into the manifest schema."""
    try:
        count = levircc_to_manifest(captions, out)
    except Exception as exc:
        click.echo(f"conversion failed: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"wrote {count} manifest entries to {out}")


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="TOML file with [backends.*] and [run] sections.")
@click.option("--store", "store_path", type=click.Path(file_okay=False))
@click.option("--strategy", type=click.Choice([s.value for s in Strategy]))
@click.option("--captioner")
@click.option("--composer")
@click.option("--n", type=int)
@click.option("--seed", type=int)
@click.option("--split", type=click.Choice(["train", "val", "test"]))
@click.option("--cache", "cache_path", type=click.Path(file_okay=False))
@click.option("--parallelism", type=int)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def cmd_run(config_path, store_path, strategy, captioner, composer, n, seed, split,
            cache_path, parallelism, out_path) -> None:
    """Generate one explanation per sampled pair, writing JSONL records."""
    try:
        backends, run_settings = load_config(config_path) if config_path else ({}, {})
        overrides = {
            "store": store_path, "strategy": strategy, "captioner": captioner,
            "composer": composer, "n": n, "seed": seed, "split": split,
            "cache": cache_path, "parallelism": parallelism, "out": out_path,
        }
        merged = dict(run_settings)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        try:
            run_config = RunConfig(**merged)
        except TypeError as exc:
            raise ConfigError(f"bad run settings: {exc}") from exc
        for role in ("captioner", "composer"):
            name = getattr(run_config, role)
            if name not in backends:
                raise ConfigError(f"unknown backend {name!r} for {role} "
                                  f"(configured: {sorted(backends) or 'none'})")
        captioner_spec = backends[run_config.captioner]
        composer_spec = backends[run_config.composer]
        store = DatasetStore.open(run_config.store)
        if not store.entries:
            raise ConfigError(f"store {run_config.store!r} is empty or missing")
        pair_ids = sample_pairs(store, run_config.n, run_config.seed, run_config.split)
    except (ConfigError, Exception) as exc:
        if not isinstance(exc, ConfigError):
            exc = ConfigError(str(exc))
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    plan = build_plan(run_config.strategy)
    cache = ResponseCache(run_config.cache) if run_config.cache else None

    def one_pair(pair_id: str) -> GenerationRecord:
        pair = load_pair(store, pair_id)
        return execute(plan, pair, captioner_spec, composer_spec, cache)

    outcomes: dict[str, dict] = {}
    with ThreadPoolExecutor(max_workers=run_config.parallelism) as pool:
        futures = {pool.submit(one_pair, pid): pid for pid in pair_ids}
        for future in as_completed(futures):
            pair_id = futures[future]
            try:
                outcomes[pair_id] = future.result().to_json_dict()
            except Exception as exc:
                outcomes[pair_id] = {"pair_id": pair_id, "error": str(exc)}

    out_file = Path(run_config.out)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    with out_file.open("w", encoding="utf-8") as out:
        for pair_id in pair_ids:
            out.write(json.dumps(outcomes[pair_id], ensure_ascii=False) + "\n")

    failures = sum(1 for o in outcomes.values() if "error" in o)
    click.echo(f"wrote {len(pair_ids) - failures} records "
               f"({failures} failures) to {out_file}")
    if failures:
        sys.exit(EXIT_PARTIAL)


@main.command("score")
@click.option("--records", "records_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_path", required=True, type=click.Path(file_okay=False))
@click.option("--stopwords/--no-stopwords", "use_stopwords", default=False,
              help="Drop the default stopword nouns before scoring.")
@click.option("--stopword-file", type=click.Path(exists=True, dir_okay=False),
              help="Replace the default stopword list (one word per line).")
@click.option("--out-csv", required=True, type=click.Path(dir_okay=False))
@click.option("--out-report", required=True, type=click.Path(dir_okay=False))
def cmd_score(records_path, store_path, use_stopwords, stopword_file,
              out_csv, out_report) -> None:
    """Score run records: per-pair coverage CSV plus a grouped metric report."""
    try:
        records, _errors = read_records(records_path)
        if not records:
            raise ConfigError(f"{records_path}: no records to score")
        store = DatasetStore.open(store_path)
        stopwords = frozenset()
        if stopword_file:
            stopwords = load_stopwords(stopword_file)
        elif use_stopwords:
            stopwords = DEFAULT_STOPWORDS
        tagger = default_tagger()
        results = []
        for record in records:
            entry = store.entries.get(record.pair_id)
            if entry is None:
                raise ConfigError(f"record pair {record.pair_id!r} not in store")
            results.append(
                coverage(record.explanation, entry.captions, tagger, stopwords,
                         pair_id=record.pair_id)
            )
        metric_report = aggregate(results, records)
    except ConfigError as exc:
        click.echo(f"score failed: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    with Path(out_csv).open("w", encoding="utf-8") as out:
        out.write("pair_id,covered,total,percent\n")
        for result in results:
            out.write(f"{result.pair_id},{result.covered},{result.total},"
                      f"{result.percent:.4f}\n")
    Path(out_report).write_text(
        json.dumps(
            {"rows": [asdict(row) for row in metric_report.rows]},
            ensure_ascii=False, indent=2,
        ) + "\n",
        encoding="utf-8",
    )
    for row in metric_report.rows:
        click.echo(f"{row.strategy} / {row.model_chain}: "
                   f"coverage {row.mean_coverage_pct:.2f}%, "
                   f"avg words {row.mean_word_count:.2f} (n={row.n_items})")


@main.command("serve")
@click.option("--records", "records_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_path", required=True, type=click.Path(file_okay=False))
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--run-id", default=None, help="Defaults to the records file stem.")
@click.option("--ledger-dir", default="ledgers", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--annotators", default=None,
              help="Comma-separated allowlist; open registration when omitted.")
@click.option("--static-dir", default=None, type=click.Path(file_okay=False),
              help="Built rating-console assets to serve at /.")
def cmd_serve(records_path, store_path, port, host, run_id, ledger_dir,
              annotators, static_dir) -> None:
    """Serve the rating API (and console, when built) for one run."""
    import uvicorn

    from .service import create_app

    try:
        records, _ = read_records(records_path)
        if not records:
            raise ConfigError(f"{records_path}: no records to annotate")
        store = DatasetStore.open(store_path)
        app = create_app(
            store,
            records,
            run_id=run_id or Path(records_path).stem,
            ledger_dir=ledger_dir,
            annotators=annotators.split(",") if annotators else None,
            static_dir=static_dir,
        )
    except (ConfigError, Exception) as exc:
        if not isinstance(exc, ConfigError):
            exc = ConfigError(str(exc))
        click.echo(f"serve failed: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    uvicorn.run(app, host=host, port=port)


def _ratings_by_group(ledger_path: Path, records: list[GenerationRecord],
                      run_id: str) -> tuple[dict, list[tuple[str, float, float]]]:
    """Fold a rating ledger into per-group rating means and item scatter."""
    latest: dict[tuple[str, str], dict] = {}
    for line in ledger_path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            entry = json.loads(line)
            latest[(entry["item_id"], entry["annotator_id"])] = entry
    per_item: dict[str, list[dict]] = {}
    for (item_id, _annotator), entry in latest.items():
        per_item.setdefault(item_id, []).append(entry)
    by_pair = {record.pair_id: record for record in records}
    group_items: dict[tuple[str, str], list[tuple[float, float]]] = {}
    scatter: list[tuple[str, float, float]] = []
    for item_id, entries in sorted(per_item.items()):
        pair_id = item_id.split(":", 1)[1] if ":" in item_id else item_id
        record = by_pair.get(pair_id)
        if record is None or item_id != item_id_for(run_id, pair_id):
            continue
        mean_t = sum(e["truthfulness"] for e in entries) / len(entries)
        mean_i = sum(e["informativeness"] for e in entries) / len(entries)
        scatter.append((item_id, mean_t, mean_i))
        key = (record.strategy,
               model_chain(record.strategy, record.captioner_backend,
                           record.composer_backend))
        group_items.setdefault(key, []).append((mean_t, mean_i))
    ratings = {
        key: (
            sum(v[0] for v in values) / len(values),
            sum(v[1] for v in values) / len(values),
        )
        for key, values in group_items.items()
    }
    return ratings, scatter


@main.command("report")
@click.option("--metrics", "metrics_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--ratings-ledger", type=click.Path(exists=True, dir_okay=False))
@click.option("--records", "records_path", type=click.Path(exists=True, dir_okay=False),
              help="Run records; required to join a ratings ledger.")
@click.option("--run-id", default=None)
@click.option("--format", "format_", type=click.Choice(["plain-table", "csv", "json"]),
              default="plain-table", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@click.option("--scatter-out", type=click.Path(dir_okay=False),
              help="Also write per-item (truthfulness, informativeness) CSV.")
def cmd_report(metrics_path, ratings_ledger, records_path, run_id, format_,
               out_path, scatter_out) -> None:
    """Render the results table from a metric report and optional ratings."""
    try:
        data = json.loads(Path(metrics_path).read_text(encoding="utf-8"))
        metric_report = MetricReport(
            rows=tuple(MetricRow(**row) for row in data["rows"])
        )
        ratings = None
        scatter: list[tuple[str, float, float]] = []
        if ratings_ledger:
            if not records_path:
                raise ConfigError("--ratings-ledger needs --records to join groups")
            records, _ = read_records(records_path)
            resolved_run = run_id or Path(records_path).stem
            ratings, scatter = _ratings_by_group(Path(ratings_ledger), records,
                                                 resolved_run)
        rows = results_table(metric_report, ratings)
        document = emit(rows, format_)
    except (ConfigError, Exception) as exc:
        if not isinstance(exc, ConfigError):
            exc = ConfigError(str(exc))
        click.echo(f"report failed: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if out_path:
        Path(out_path).write_text(document, encoding="utf-8")
        click.echo(f"wrote {format_} report to {out_path}")
    else:
        click.echo(document, nl=False)
    if scatter_out:
        with Path(scatter_out).open("w", encoding="utf-8") as out:
            out.write("item_id,mean_truthfulness,mean_informativeness\n")
            for item_id, mean_t, mean_i in scatter:
                out.write(f"{item_id},{mean_t:.4f},{mean_i:.4f}\n")


if __name__ == "__main__":
    main()
