from __future__ import annotations

import random
from dataclasses import dataclass

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from narrator.metrics import (
    DEFAULT_STOPWORDS,
    CoverageResult,
    DegenerateSeries,
    EmptyRun,
    LexiconTagger,
    NoReferences,
    aggregate,
    coverage,
    default_tagger,
    extract_nouns,
    load_stopwords,
    model_chain,
    normalize_token,
    pearson,
    reduce_plural,
    tokenize,
    word_count,
)

TAGGER = default_tagger()


def oracle_coverage(explanation, references, tagger, stopwords=frozenset(), pair_id=""):
    """Brute-force reference implementation: nested-loop membership over
    the union noun set, no set algebra."""
    union: list[str] = []
    for ref in references:
        for noun in sorted(extract_nouns(ref, tagger, stopwords).nouns):
            if noun not in union:
                union.append(noun)
    tokens = [normalize_token(t) for t in tokenize(explanation)]
    covered = 0
    for noun in union:
        present = False
        for token in tokens:
            if token == noun:
                present = True
        if present:
            covered += 1
    if not union:
        return CoverageResult(pair_id, 0, 0, 0.0, degenerate=True)
    return CoverageResult(pair_id, covered, len(union), 100.0 * covered / len(union))


# --- noun extraction ---


def test_extract_nouns_reference_sentence():
    result = extract_nouns("Five villas are built on both sides of the road.", TAGGER)
    assert result.nouns == {"villa", "side", "road"}


def test_extract_nouns_empty_text():
    assert extract_nouns("", TAGGER).nouns == frozenset()


def test_extract_nouns_stopword_removal():
    result = extract_nouns("the change in the scene", TAGGER, stopwords=DEFAULT_STOPWORDS)
    assert result.nouns == frozenset()
    # Without stopwords the same nouns survive.
    assert extract_nouns("the change in the scene", TAGGER).nouns == {"change", "scene"}


@pytest.mark.parametrize(
    ("plural", "singular"),
    [
        ("houses", "house"),
        ("branches", "branch"),
        ("boxes", "box"),
        ("bushes", "bush"),
        ("classes", "class"),
        ("roads", "road"),
        ("villas", "villa"),
        ("grass", "grass"),
        ("children", "child"),
        ("leaves", "leaf"),
        ("buses", "bus"),
        ("cities", "city"),
        ("gas", "gas"),
    ],
)
def test_plural_reduction_goldens(plural, singular):
    assert reduce_plural(plural) == singular


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=12))
@settings(max_examples=200, deadline=None)
def test_plural_reduction_is_a_fixed_point(word):
    reduced = reduce_plural(word)
    assert reduce_plural(reduced) == reduced


CORPUS_WORDS = (
    "the a on of five villas houses roads trees buildings are built intersection "
    "bridges grass fields cars pools forests rivers scene change area development "
    "transformation sides edges construction farmland new small both it"
).split()


@given(st.lists(st.sampled_from(CORPUS_WORDS), min_size=1, max_size=20))
@settings(max_examples=100, deadline=None)
def test_extract_nouns_idempotent(words):
    sentence = " ".join(words)
    first = extract_nouns(sentence, TAGGER).nouns
    again = extract_nouns(" ".join(sorted(first)), TAGGER).nouns
    assert again == first


def test_custom_lexicon_tagger():
    tagger = LexiconTagger(nouns=["widget"])
    assert extract_nouns("three widgets and a gadget", tagger).nouns == {"widget"}


def test_load_stopwords_file(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("change\nscenes\n\n# comment\narea\n", encoding="utf-8")
    assert load_stopwords(path) == {"change", "scene", "area"}


# --- coverage ---


def test_coverage_self_concatenation_is_full():
    references = [
        "Five villas are built on both sides of the road.",
        "Many trees grow near the new buildings.",
    ]
    explanation = " ".join(references)
    result = coverage(explanation, references, TAGGER)
    assert result.percent == 100.0
    assert result.covered == result.total > 0


def test_coverage_empty_explanation_is_zero():
    result = coverage("", ["a road near the house"], TAGGER)
    assert result.percent == 0.0
    assert not result.degenerate


def test_coverage_half_covered():
    references = ["the road and the house", "a tree near the building"]
    union = set()
    for ref in references:
        union |= extract_nouns(ref, TAGGER).nouns
    assert union == {"road", "house", "tree", "building"}
    result = coverage("a road with houses", references, TAGGER)
    assert (result.covered, result.total, result.percent) == (2, 4, 50.0)


def test_coverage_degenerate_when_references_have_no_nouns():
    result = coverage("anything", ["it is very new", "both are built"], TAGGER)
    assert result.degenerate
    assert (result.covered, result.total, result.percent) == (0, 0, 0.0)


def test_coverage_requires_references():
    with pytest.raises(NoReferences):
        coverage("text", [], TAGGER)


WORD_POOL = (
    "road roads house houses tree trees building buildings villa villas bridge "
    "bridges grass field fields car cars pool pools the a on of are built new "
    "small change scene area it both near"
).split()


def random_case(rng: random.Random):
    references = [
        " ".join(rng.choices(WORD_POOL, k=rng.randint(3, 12)))
        for _ in range(rng.randint(1, 5))
    ]
    explanation = " ".join(rng.choices(WORD_POOL, k=rng.randint(0, 25)))
    stopwords = DEFAULT_STOPWORDS if rng.random() < 0.5 else frozenset()
    return explanation, references, stopwords


def test_coverage_matches_bruteforce_oracle_randomized():
    rng = random.Random(20240615)
    for _ in range(200):
        explanation, references, stopwords = random_case(rng)
        fast = coverage(explanation, references, TAGGER, stopwords)
        slow = oracle_coverage(explanation, references, TAGGER, stopwords)
        assert fast == slow


@given(st.lists(st.sampled_from(WORD_POOL), min_size=0, max_size=15),
       st.lists(st.sampled_from(WORD_POOL), min_size=1, max_size=10))
@settings(max_examples=100, deadline=None)
def test_coverage_monotone_under_appending(explanation_words, appended):
    references = ["roads and houses near the bridge", "trees by the pool"]
    base = coverage(" ".join(explanation_words), references, TAGGER)
    extended = coverage(" ".join(explanation_words + appended), references, TAGGER)
    assert extended.covered >= base.covered
    assert 0.0 <= base.percent <= 100.0


# --- word count ---


def test_word_count_reference_sentence():
    assert word_count("Five villas are built on both sides of the road.") == 10


def test_word_count_empty():
    assert word_count("") == 0


def test_word_count_collapses_runs_of_whitespace():
    assert word_count("a  b") == 2
    assert word_count("  a\t b \n") == 2


# --- pearson ---


def test_pearson_perfect_correlation():
    assert pearson((1, 2, 3), (1, 2, 3)) == pytest.approx(1.0, abs=1e-12)


def test_pearson_perfect_anticorrelation():
    assert pearson((1, 2, 3), (3, 2, 1)) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_closed_form_fixture():
    assert pearson((1, 2, 3, 4), (2, 1, 4, 3)) == pytest.approx(0.6, abs=1e-12)


@pytest.mark.parametrize("xs,ys", [((1, 1, 1), (1, 2, 3)), ((1,), (2,)), ((), ())])
def test_pearson_degenerate_series(xs, ys):
    with pytest.raises(DegenerateSeries):
        pearson(xs, ys)


@given(
    st.lists(
        st.integers(min_value=-1000, max_value=1000).map(lambda v: v / 10.0),
        min_size=3,
        max_size=20,
    ),
    st.floats(min_value=0.1, max_value=10),
    st.floats(min_value=-50, max_value=50),
    st.randoms(use_true_random=False),
)
@settings(max_examples=100, deadline=None)
def test_pearson_affine_invariance(xs, scale, shift, rng):
    assume(max(xs) - min(xs) >= 0.5)
    ys = [x + rng.uniform(-10, 10) for x in xs]
    assume(max(ys) - min(ys) >= 0.5)
    base = pearson(xs, ys)
    transformed = pearson([scale * x + shift for x in xs], ys)
    assert transformed == pytest.approx(base, abs=1e-9)
    assert pearson([-x for x in xs], ys) == pytest.approx(-base, abs=1e-9)


# --- aggregation ---


@dataclass(frozen=True)
class FakeRecord:
    pair_id: str
    strategy: str
    captioner_backend: str
    composer_backend: str
    word_count: int


def test_aggregate_means():
    results = [CoverageResult("p1", 1, 5, 20.0), CoverageResult("p2", 3, 10, 30.0)]
    records = [
        FakeRecord("p1", "step-by-step", "cap", "composer", 40),
        FakeRecord("p2", "step-by-step", "cap", "composer", 60),
    ]
    report = aggregate(results, records)
    (row,) = report.rows
    assert row.mean_coverage_pct == 25.0
    assert row.mean_word_count == 50.0
    assert row.n_items == 2
    assert row.model_chain == "cap → composer"


def test_aggregate_single_item():
    report = aggregate(
        [CoverageResult("p1", 1, 2, 50.0)],
        [FakeRecord("p1", "all-at-once", "vlm", "vlm", 12)],
    )
    (row,) = report.rows
    assert row.mean_coverage_pct == 50.0
    assert row.model_chain == "vlm"


def test_aggregate_groups_by_strategy_and_chain():
    results = [CoverageResult(f"p{i}", 1, 2, float(10 * i)) for i in range(4)]
    records = [
        FakeRecord("p0", "hybrid", "a", "a", 10),
        FakeRecord("p1", "all-at-once", "a", "a", 10),
        FakeRecord("p2", "step-by-step", "a", "b", 10),
        FakeRecord("p3", "step-by-step", "a", "c", 10),
    ]
    report = aggregate(results, records)
    keys = [(row.strategy, row.model_chain) for row in report.rows]
    assert keys == [
        ("all-at-once", "a"),
        ("step-by-step", "a → b"),
        ("step-by-step", "a → c"),
        ("hybrid", "a → a"),
    ]


def test_aggregate_empty_run():
    with pytest.raises(EmptyRun):
        aggregate([], [])


def test_model_chain_shapes():
    assert model_chain("all-at-once", "x", "vlm") == "vlm"
    assert model_chain("hybrid", "vlm", "vlm") == "vlm → vlm"
