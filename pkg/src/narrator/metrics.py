"""Automatic evaluation: noun coverage of the generated explanations
against reference captions, word-count statistics, and Pearson correlation
between rating dimensions.

Noun extraction runs through a pluggable part-of-speech tagger. The bundled
default is a deterministic lexicon tagger (domain noun list plus suffix
heuristics); a statistical tagger can be dropped in through the same
interface when heavier linguistic fidelity is wanted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol, Sequence

NOUN_TAG = "NOUN"
OTHER_TAG = "OTHER"

_TOKEN_RE = re.compile(r"[A-Za-z]+")

# Plural suffixes that genuinely take "-es": stems ending in these keep
# their final consonant cluster after reduction.
_ES_STEM_ENDINGS = ("x", "z", "ch", "sh", "ss")

_NOUN_SUFFIXES = (
    "tion", "sion", "ment", "ness", "ity", "hood", "ship", "scape", "ance", "ence",
)

IRREGULAR_PLURALS = {
    "children": "child",
    "men": "man",
    "women": "woman",
    "feet": "foot",
    "geese": "goose",
    "mice": "mouse",
    "leaves": "leaf",
    "lives": "life",
    "buses": "bus",
    "axes": "axis",
    "cities": "city",
    "facilities": "facility",
}

_FUNCTION_WORDS = frozenset(
    """
    the a an and or but if then than as is are was were be been being have has
    had do does did will would can could may might shall should must of in on
    at by for with from to into onto over under above below between through
    across near beside behind before after both all some many few several
    more most other another each every no not now very there here this that
    these those it its they their them he she his her we our you your i
    while when where which who whom whose what why how hence whence also
    """.split()
)

DEFAULT_STOPWORDS = frozenset({"change", "scene", "area"})


class NoReferences(Exception):
    """Coverage was asked for with no reference captions."""


class DegenerateSeries(Exception):
    """Pearson over a constant or too-short series."""


class EmptyRun(Exception):
    """Aggregation over an empty result set."""


class TaggerPlugin(Protocol):
    name: str

    def tag(self, text: str) -> list[tuple[str, str]]: ...


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def reduce_plural(word: str) -> str:
    """Deterministic plural-to-singular reduction.

    Strips "-es" after the plural-forming sibilant endings, otherwise a
    plain "-s" (never "-ss", "-is", or "-us", which mark singulars);
    irregulars come from a small exception table. The result is a fixed
    point of this function.
    """
    if word in IRREGULAR_PLURALS:
        return IRREGULAR_PLURALS[word]
    if len(word) > 3 and word.endswith("es") and word[:-2].endswith(_ES_STEM_ENDINGS):
        return word[:-2]
    if len(word) > 3 and word.endswith("s") and not word.endswith(("ss", "is", "us")):
        return word[:-1]
    return word


def normalize_token(token: str) -> str:
    return reduce_plural(token.lower().strip())


def _load_lexicon_asset(filename: str) -> frozenset[str]:
    text = resources.files("narrator").joinpath("lexicon", filename).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword list: plain text, one word per line."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(normalize_token(line))
    return frozenset(words)


class LexiconTagger:
    """Deterministic tagger: a token is a noun when its normalized form is
    in the domain lexicon or carries a noun-like suffix; function words are
    never nouns."""

    name = "lexicon"

    def __init__(self, nouns: Iterable[str] | None = None):
        if nouns is None:
            self._nouns = _load_lexicon_asset("nouns.txt")
        else:
            self._nouns = frozenset(normalize_token(n) for n in nouns)

    def tag(self, text: str) -> list[tuple[str, str]]:
        tagged = []
        for token in tokenize(text):
            lowered = token.lower()
            normalized = normalize_token(token)
            if lowered in _FUNCTION_WORDS or normalized in _FUNCTION_WORDS:
                tagged.append((token, OTHER_TAG))
            elif normalized in self._nouns or normalized.endswith(_NOUN_SUFFIXES):
                tagged.append((token, NOUN_TAG))
            else:
                tagged.append((token, OTHER_TAG))
        return tagged


def default_tagger() -> LexiconTagger:
    return LexiconTagger()


@dataclass(frozen=True)
class NounSet:
    nouns: frozenset[str]
    source: str = "references"


@dataclass(frozen=True)
class CoverageResult:
    pair_id: str
    covered: int
    total: int
    percent: float
    degenerate: bool = False


def extract_nouns(
    text: str,
    tagger: TaggerPlugin,
    stopwords: frozenset[str] | set[str] = frozenset(),
    source: str = "references",
) -> NounSet:
    """Unique normalized noun types in `text`, minus stopwords."""
    nouns = {
        normalize_token(token)
        for token, tag in tagger.tag(text)
        if tag == NOUN_TAG
    }
    nouns -= {normalize_token(w) for w in stopwords}
    nouns.discard("")
    return NounSet(nouns=frozenset(nouns), source=source)


def coverage(
    explanation: str,
    references: Sequence[str],
    tagger: TaggerPlugin,
    stopwords: frozenset[str] | set[str] = frozenset(),
    pair_id: str = "",
) -> CoverageResult:
    """Share of reference-caption nouns that occur in the explanation.

    The reference noun set is the union over all references; the explanation
    side is matched on normalized tokens, no tagging. A reference set with
    no nouns at all yields percent 0 and a degenerate flag.
    """
    if not references:
        raise NoReferences(pair_id or "<no pair id>")
    union: set[str] = set()
    for ref in references:
        union |= extract_nouns(ref, tagger, stopwords).nouns
    explanation_tokens = {normalize_token(t) for t in tokenize(explanation)}
    covered = len(union & explanation_tokens)
    total = len(union)
    if total == 0:
        return CoverageResult(pair_id, 0, 0, 0.0, degenerate=True)
    return CoverageResult(pair_id, covered, total, 100.0 * covered / total)


def word_count(text: str) -> int:
    """Number of maximal whitespace-delimited tokens."""
    return len(text.split())


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise DegenerateSeries(f"series lengths differ: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise DegenerateSeries(f"need at least 2 points, got {n}")
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    sxx = sum(d * d for d in dx)
    syy = sum(d * d for d in dy)
    denominator = math.sqrt(sxx) * math.sqrt(syy)
    if denominator == 0.0:
        raise DegenerateSeries("constant series has no correlation")
    sxy = sum(a * b for a, b in zip(dx, dy))
    return sxy / denominator


@dataclass(frozen=True)
class MetricRow:
    strategy: str
    model_chain: str
    mean_coverage_pct: float
    mean_word_count: float
    n_items: int


@dataclass(frozen=True)
class MetricReport:
    rows: tuple[MetricRow, ...]


_STRATEGY_ORDER = {"all-at-once": 0, "step-by-step": 1, "hybrid": 2}


def model_chain(strategy: str, captioner: str, composer: str) -> str:
    """Human-readable backend pairing, single name for one-stage runs."""
    if strategy == "all-at-once":
        return composer
    return f"{captioner} → {composer}"


def aggregate(results: Sequence[CoverageResult], records: Sequence) -> MetricReport:
    """Per-(strategy, model chain) means of coverage percent and word count.

    `records` are generation records (or anything exposing pair_id,
    strategy, captioner_backend, composer_backend, word_count); coverage
    results are joined to them by pair_id.
    """
    if not results or not records:
        raise EmptyRun("nothing to aggregate")
    by_pair = {r.pair_id: r for r in results}
    groups: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for record in records:
        cov = by_pair.get(record.pair_id)
        if cov is None:
            continue
        chain = model_chain(record.strategy, record.captioner_backend, record.composer_backend)
        groups.setdefault((record.strategy, chain), []).append(
            (cov.percent, float(record.word_count))
        )
    if not groups:
        raise EmptyRun("no coverage results matched the records")
    rows = []
    for (strategy, chain) in sorted(
        groups, key=lambda key: (_STRATEGY_ORDER.get(key[0], 99), key[1])
    ):
        values = groups[(strategy, chain)]
        rows.append(
            MetricRow(
                strategy=strategy,
                model_chain=chain,
                mean_coverage_pct=sum(v[0] for v in values) / len(values),
                mean_word_count=sum(v[1] for v in values) / len(values),
                n_items=len(values),
            )
        )
    return MetricReport(rows=tuple(rows))
