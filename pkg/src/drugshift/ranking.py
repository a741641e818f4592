"""Ranked drug lists and their evaluation against reference labels.

A ranking orders drugs by how strongly they appear to pull the
measurement down: most negative score first.  Drugs whose score is
exactly zero (or that a method never scored) do not get individual
ranks; they form a single tied block below every ranked entry, and all
metrics treat that block as one tie group.

AUROC follows the pairwise definition: over all (positive, negative)
drug pairs, count 1 when the positive is ranked strictly above the
negative and 1/2 when the two are tied, then divide by the number of
pairs.  The ROC curve is swept one tie group at a time, so the zero
block contributes a single straight segment to (1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .cohort import Cohort
from .errors import EvaluationError
from .pairwise_mean import DEFAULT_WINDOW_DAYS, pm_scores

DEFAULT_PRECISION_KS = (10, 20, 40)


@dataclass(frozen=True)
class LabelSet:
    """Reference drugs known to move the measurement, by direction."""

    decrease: frozenset[str]
    increase: frozenset[str] = frozenset()

    def __post_init__(self):
        overlap = self.decrease & self.increase
        if overlap:
            raise EvaluationError(
                f"drugs labeled both decrease and increase: {sorted(overlap)}"
            )

    def direction_sets(self, positive_label: str) -> tuple[frozenset[str], frozenset[str]]:
        """(positives, opposite-direction labels) for the chosen target."""
        if positive_label == "decrease":
            return self.decrease, self.increase
        if positive_label == "increase":
            return self.increase, self.decrease
        raise EvaluationError(f"unknown label direction: {positive_label!r}")


@dataclass(frozen=True)
class RankedList:
    """Scored drugs in rank order plus the tied zero block.

    ``entries`` is ascending by (score, drug id); ``zero_block`` is the
    drugs with no usable score, id-sorted for reproducibility only.
    """

    method: str
    entries: tuple[tuple[str, float], ...]
    zero_block: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    @classmethod
    def from_scores(
        cls,
        method: str,
        scores: Mapping[str, float],
        *,
        zero_scores_to_block: bool = False,
        unscored: Iterable[str] = (),
        notes: Iterable[str] = (),
    ) -> "RankedList":
        """Build a ranking from drug scores.

        ``zero_scores_to_block`` is for variable-selection output, where
        a coefficient of exactly zero means "not selected" rather than
        "no shift": such drugs join the zero block instead of being
        ranked.  For methods where 0.0 is an honest score (the paired
        shift baseline), leave it off and a zero ranks like any other
        value.  ``unscored`` adds drugs the method could not score at
        all.
        """
        blocked = set(unscored)
        items = []
        for drug, score in scores.items():
            if zero_scores_to_block and score == 0.0:
                blocked.add(drug)
            else:
                items.append((drug, float(score)))
        items.sort(key=lambda item: (item[1], item[0]))
        return cls(
            method=method,
            entries=tuple(items),
            zero_block=tuple(sorted(blocked)),
            notes=tuple(notes),
        )

    @property
    def drugs(self) -> tuple[str, ...]:
        return tuple(d for d, _ in self.entries) + self.zero_block

    def top(self, k: int) -> tuple[str, ...]:
        """The first ``k`` individually-ranked drugs (never the zero block)."""
        return tuple(d for d, _ in self.entries[:k])


def restrict(ranked: RankedList, universe: Iterable[str]) -> RankedList:
    """Project a ranking onto a drug universe.

    Universe drugs the method scored keep their order; the rest join the
    zero block (the method has nothing to say about them).
    """
    allowed = frozenset(universe)
    entries = tuple(item for item in ranked.entries if item[0] in allowed)
    ranked_ids = {d for d, _ in entries}
    zeros = tuple(sorted(allowed - ranked_ids))
    notes = ranked.notes
    missing = allowed - set(ranked.drugs)
    if missing:
        notes = notes + (
            f"{len(missing)} universe drugs unseen by {ranked.method}, "
            "placed in the zero block",
        )
    return RankedList(
        method=ranked.method, entries=entries, zero_block=zeros, notes=notes
    )


def union_top_k(rankings: Sequence[RankedList], k: int) -> frozenset[str]:
    """Union of the top-``k`` ranked drugs of several methods."""
    out: set[str] = set()
    for ranking in rankings:
        out.update(ranking.top(k))
    return frozenset(out)


def _tie_groups(ranked: RankedList) -> list[list[str]]:
    """Rank-ordered tie groups, best first; the zero block is the last."""
    groups: list[list[str]] = []
    last_score: float | None = None
    for drug, score in ranked.entries:
        if last_score is not None and score == last_score:
            groups[-1].append(drug)
        else:
            groups.append([drug])
            last_score = score
    if ranked.zero_block:
        groups.append(list(ranked.zero_block))
    return groups


def _label_groups(
    ranked: RankedList,
    labels: LabelSet,
    *,
    positive_label: str,
    labeled_only: bool,
    exclude_opposite: bool,
) -> tuple[list[tuple[int, int]], int, int]:
    """Per tie group (positives, negatives) after applying the flags."""
    positives, opposite = labels.direction_sets(positive_label)
    counts: list[tuple[int, int]] = []
    n_pos = n_neg = 0
    for group in _tie_groups(ranked):
        p = n = 0
        for drug in group:
            if drug in positives:
                p += 1
            elif drug in opposite:
                if not exclude_opposite:
                    n += 1
            elif not labeled_only:
                n += 1
        counts.append((p, n))
        n_pos += p
        n_neg += n
    if n_pos == 0:
        raise EvaluationError(
            f"no {positive_label}-labeled drug appears in the ranking"
        )
    if n_neg == 0:
        raise EvaluationError("no negative drugs left to rank against")
    return counts, n_pos, n_neg


def auroc(
    ranked: RankedList,
    labels: LabelSet,
    *,
    positive_label: str = "decrease",
    labeled_only: bool = False,
    exclude_opposite: bool = False,
) -> float:
    """Probability a random positive outranks a random negative (ties 1/2)."""
    counts, n_pos, n_neg = _label_groups(
        ranked,
        labels,
        positive_label=positive_label,
        labeled_only=labeled_only,
        exclude_opposite=exclude_opposite,
    )
    # Walk from the worst group up, so every negative already seen is
    # ranked strictly below the current group's positives.
    pairs = 0.0
    neg_below = 0
    for p, n in reversed(counts):
        pairs += p * (neg_below + 0.5 * n)
        neg_below += n
    return pairs / (n_pos * n_neg)


def roc_points(
    ranked: RankedList,
    labels: LabelSet,
    *,
    positive_label: str = "decrease",
    labeled_only: bool = False,
    exclude_opposite: bool = False,
) -> list[tuple[float, float]]:
    """ROC polyline vertices from (0, 0) to (1, 1), one per tie group."""
    counts, n_pos, n_neg = _label_groups(
        ranked,
        labels,
        positive_label=positive_label,
        labeled_only=labeled_only,
        exclude_opposite=exclude_opposite,
    )
    points = [(0.0, 0.0)]
    cum_p = cum_n = 0
    for p, n in counts:
        if p == 0 and n == 0:
            continue
        cum_p += p
        cum_n += n
        points.append((cum_n / n_neg, cum_p / n_pos))
    return points


def precision_at_k(
    ranked: RankedList,
    labels: LabelSet,
    ks: Sequence[int],
    *,
    positive_label: str = "decrease",
) -> dict[int, float]:
    """Fraction of the top ``K`` ranked drugs that are positives, per K.

    Only individually-ranked entries count toward the top; the zero
    block never does.  When fewer than ``K`` drugs are ranked, the
    denominator is capped at the list length (callers can detect this
    by comparing K with ``len(ranked.entries)``).
    """
    if not ks:
        raise EvaluationError("no K values requested")
    positives, _ = labels.direction_sets(positive_label)
    out: dict[int, float] = {}
    for k in ks:
        if k < 1:
            raise EvaluationError(f"K must be positive, got {k}")
        head = ranked.top(k)
        if not head:
            raise EvaluationError("ranking has no scored entries")
        hits = sum(1 for d in head if d in positives)
        out[int(k)] = hits / len(head)
    return out


@dataclass(frozen=True)
class EvalResult:
    """All evaluation outputs for one ranking."""

    method: str
    auroc: float
    roc: tuple[tuple[float, float], ...]
    precision: dict[int, float]
    n_pos: int
    n_neg: int
    notes: tuple[str, ...] = field(default_factory=tuple)


def evaluate_ranked(
    ranked: RankedList,
    labels: LabelSet,
    *,
    positive_label: str = "decrease",
    ks: Sequence[int] = DEFAULT_PRECISION_KS,
    labeled_only: bool = False,
    exclude_opposite: bool = False,
) -> EvalResult:
    """AUROC, ROC polyline, and precision@K for one ranking."""
    flags = dict(
        positive_label=positive_label,
        labeled_only=labeled_only,
        exclude_opposite=exclude_opposite,
    )
    _, n_pos, n_neg = _label_groups(ranked, labels, **flags)
    notes = list(ranked.notes)
    precision = precision_at_k(ranked, labels, ks, positive_label=positive_label)
    for k in ks:
        if k > len(ranked.entries):
            notes.append(
                f"precision@{k}: only {len(ranked.entries)} drugs are ranked; "
                "denominator capped"
            )
    return EvalResult(
        method=ranked.method,
        auroc=auroc(ranked, labels, **flags),
        roc=tuple(roc_points(ranked, labels, **flags)),
        precision=precision,
        n_pos=n_pos,
        n_neg=n_neg,
        notes=tuple(notes),
    )


def ensemble_rank(
    cohort: Cohort,
    selected_support: Iterable[str],
    *,
    window_days: int = DEFAULT_WINDOW_DAYS,
    method: str = "ensemble",
) -> RankedList:
    """Re-score a regression-selected support with the before/after shift.

    Keeps the lasso's variable selection but replaces coefficient
    magnitudes with the simpler paired-shift score.  Support drugs with
    no patient contributing both a before and an after measurement have
    no score and land in the zero block.
    """
    support = sorted(set(selected_support))
    scored = pm_scores(cohort, window_days=window_days, drugs=support)
    scores = {s.drug: s.score for s in scored}
    unscored = [d for d in support if d not in scores]
    notes = []
    if unscored:
        notes.append(
            f"{len(unscored)} selected drugs had no paired before/after "
            "measurements and were left unscored"
        )
    return RankedList.from_scores(method, scores, unscored=unscored, notes=notes)
