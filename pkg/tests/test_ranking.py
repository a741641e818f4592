"""Ranking metrics: AUROC examples, ROC curves, precision@K, list utilities."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drugshift.errors import EvaluationError
from drugshift.ranking import (
    EvalResult,
    LabelSet,
    RankedList,
    auroc,
    ensemble_rank,
    evaluate_ranked,
    precision_at_k,
    restrict,
    roc_points,
    union_top_k,
)

from conftest import make_cohort
from oracles import brute_auroc


def ranked_from(scores, *, zero_block=(), method="test"):
    return RankedList.from_scores(method, scores, unscored=zero_block)


def labels_of(decrease, increase=()):
    return LabelSet(decrease=frozenset(decrease), increase=frozenset(increase))


def test_auroc_perfect():
    ranked = ranked_from({"a": -5.0, "b": -1.0, "c": 3.0})
    assert auroc(ranked, labels_of({"a", "b"})) == 1.0


def test_auroc_all_tied():
    ranked = ranked_from({"a": 1.0, "b": 1.0, "c": 1.0})
    assert auroc(ranked, labels_of({"a"})) == 0.5


def test_auroc_zero_is_an_honest_score():
    # One positive above the negative, one below: (1 + 0) / 2.
    ranked = ranked_from({"a": -5.0, "b": 2.0, "c": 0.0})
    assert auroc(ranked, labels_of({"a", "b"})) == 0.5


def test_auroc_zero_block_is_one_tied_group():
    ranked = RankedList(method="t", entries=(("a", -1.0),), zero_block=("b", "c", "d"))
    # Positive "b" loses to "a" and ties with "c","d": (0 + 1/2 + 1/2) / 3.
    assert auroc(ranked, labels_of({"b"})) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_auroc_all_in_zero_block():
    ranked = RankedList(method="t", entries=(), zero_block=("a", "b", "c"))
    assert auroc(ranked, labels_of({"a"})) == 0.5
    points = roc_points(ranked, labels_of({"a"}))
    assert points == [(0.0, 0.0), (1.0, 1.0)]


def test_auroc_needs_both_classes():
    ranked = ranked_from({"a": -1.0, "b": 1.0})
    with pytest.raises(EvaluationError):
        auroc(ranked, labels_of({"z"}))
    with pytest.raises(EvaluationError):
        auroc(ranked, labels_of({"a", "b"}))


def test_roc_hand_example():
    # One positive ranked first among three.
    ranked = ranked_from({"pos": -3.0, "n1": 0.5, "n2": 2.0})
    points = roc_points(ranked, labels_of({"pos"}))
    assert points == [(0.0, 0.0), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]


def test_trapezoid_area_equals_auroc(rng):
    for trial in range(50):
        n = int(rng.integers(3, 40))
        drugs = [f"d{i}" for i in range(n)]
        scores = {}
        block = []
        for d in drugs:
            if rng.random() < 0.2:
                block.append(d)
            else:
                # Coarse grid of scores forces plenty of exact ties.
                scores[d] = float(rng.integers(-3, 4))
        positives = {d for d in drugs if rng.random() < 0.4}
        if not positives or positives >= set(drugs):
            continue
        ranked = RankedList.from_scores("t", scores, unscored=block)
        labels = labels_of(positives)
        points = roc_points(ranked, labels)
        area = 0.0
        for (x1, y1), (x2, y2) in zip(points, points[1:]):
            area += (x2 - x1) * (y1 + y2) / 2.0
        assert abs(area - auroc(ranked, labels)) <= 1e-12


def test_auroc_matches_brute_force(rng):
    for trial in range(50):
        n = int(rng.integers(2, 200))
        drugs = [f"d{i}" for i in range(n)]
        scores = {}
        block = []
        for d in drugs:
            if rng.random() < 0.15:
                block.append(d)
            else:
                scores[d] = float(rng.integers(-5, 6)) / 2.0
        positives = {d for d in drugs if rng.random() < 0.3}
        if not positives or positives >= set(drugs):
            continue
        negatives = set(drugs) - positives
        ranked = RankedList.from_scores("t", scores, unscored=block)
        labels = labels_of(positives)
        assert auroc(ranked, labels) == brute_auroc(ranked, positives, negatives)


def test_monotone_transform_invariance(rng):
    scores = {f"d{i}": float(v) for i, v in enumerate(rng.normal(size=30))}
    positives = {f"d{i}" for i in range(0, 30, 3)}
    labels = labels_of(positives)
    base = ranked_from(scores)
    transformed = ranked_from({d: np.arctan(s) * 2.0 + 1.0 for d, s in scores.items()})
    assert auroc(base, labels) == pytest.approx(auroc(transformed, labels), abs=1e-15)
    assert precision_at_k(base, labels, [5, 10]) == precision_at_k(
        transformed, labels, [5, 10]
    )


def test_precision_hand_examples():
    ranked = ranked_from({"a": -3.0, "b": -2.0, "c": -1.0})
    labels = labels_of({"a", "c"})
    result = precision_at_k(ranked, labels, [2, 3])
    assert result[2] == 0.5
    assert result[3] == pytest.approx(2.0 / 3.0)


def test_precision_k_beyond_length_caps_denominator():
    ranked = ranked_from({"a": -3.0, "b": -2.0})
    labels = labels_of({"a"})
    result = precision_at_k(ranked, labels, [10])
    assert result[10] == 0.5  # 1 positive over 2 available


def test_precision_validation():
    ranked = ranked_from({"a": -3.0})
    with pytest.raises(EvaluationError):
        precision_at_k(ranked, labels_of({"a"}), [])
    with pytest.raises(EvaluationError):
        precision_at_k(ranked, labels_of({"a"}), [0])


def test_labelset_rejects_overlap():
    with pytest.raises(EvaluationError):
        LabelSet(decrease=frozenset({"a"}), increase=frozenset({"a"}))


def test_exclude_opposite_and_labeled_only():
    ranked = ranked_from({"down": -4.0, "up": -3.0, "null": 1.0})
    labels = labels_of({"down"}, increase={"up"})
    # Default: "up" counts among the negatives and outranks "null".
    assert auroc(ranked, labels) == 1.0
    # Excluding the opposite direction leaves only "null" as a negative.
    assert auroc(ranked, labels, exclude_opposite=True) == 1.0
    # labeled_only keeps "up" (labeled) but drops "null" (unlabeled).
    assert auroc(ranked, labels, labeled_only=True) == 1.0
    with pytest.raises(EvaluationError):
        auroc(ranked, labels, labeled_only=True, exclude_opposite=True)


def test_increase_direction():
    ranked = ranked_from({"riser": 9.0, "null": 0.0})
    labels = labels_of(set(), increase={"riser"})
    # For the increase direction, bigger scores should rank first, so the
    # ascending list is walked the same way but positives sit at the bottom.
    value = auroc(ranked, labels, positive_label="increase")
    assert value == 0.0  # riser is ranked last in an ascending list


def test_restrict_to_universe():
    ranked = ranked_from({"a": -2.0, "b": -1.0, "c": 3.0})
    cut = restrict(ranked, {"a", "c", "zzz"})
    assert cut.entries == (("a", -2.0), ("c", 3.0))
    assert cut.zero_block == ("zzz",)
    assert any("zzz" in n or "1" in n for n in cut.notes)


def test_union_top_k():
    r1 = ranked_from({"a": -3.0, "b": -2.0, "c": -1.0})
    r2 = ranked_from({"c": -5.0, "d": -4.0, "a": 0.5})
    assert union_top_k([r1, r2], 2) == frozenset({"a", "b", "c", "d"})


def test_evaluate_ranked_bundle():
    ranked = ranked_from({"a": -3.0, "b": -2.0, "c": 1.0, "d": 2.0})
    labels = labels_of({"a", "b"})
    result = evaluate_ranked(ranked, labels, ks=(2, 10))
    assert isinstance(result, EvalResult)
    assert result.auroc == 1.0
    assert result.precision[2] == 1.0
    assert result.n_pos == 2 and result.n_neg == 2
    assert any("precision@10" in n for n in result.notes)


def test_ensemble_rank_scores_support_only():
    cohort = make_cohort(
        [("p1", "a", 1000), ("p1", "b", 1000), ("p1", "ghost", 9000)],
        [("p1", 900, 100.0), ("p1", 1100, 94.0)],
    )
    ranked = ensemble_rank(cohort, ["a", "b", "ghost"])
    assert [d for d, _ in ranked.entries] == ["a", "b"]
    for _, score in ranked.entries:
        assert score == pytest.approx(-6.0)
    assert ranked.zero_block == ("ghost",)
    assert ranked.notes


def test_ensemble_rank_empty_support_errors_on_evaluation():
    cohort = make_cohort(
        [("p1", "a", 1000)],
        [("p1", 900, 100.0), ("p1", 1100, 94.0)],
    )
    ranked = ensemble_rank(cohort, [])
    assert ranked.entries == ()
    with pytest.raises(EvaluationError):
        evaluate_ranked(ranked, labels_of({"a"}))


@settings(max_examples=100, deadline=None)
@given(
    scores=st.dictionaries(
        st.sampled_from([f"d{i}" for i in range(12)]),
        st.integers(-3, 3).map(float),
        min_size=2,
        max_size=12,
    ),
    positives=st.sets(st.sampled_from([f"d{i}" for i in range(12)]), min_size=1),
)
def test_auroc_brute_force_property(scores, positives):
    drugs = set(scores)
    pos = positives & drugs
    neg = drugs - pos
    if not pos or not neg:
        return
    ranked = RankedList.from_scores("t", scores)
    labels = labels_of(pos)
    assert auroc(ranked, labels) == brute_auroc(ranked, pos, neg)
