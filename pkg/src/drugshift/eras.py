"""Drug-era construction and data-driven per-drug era parameters.

A prescription on day d is assumed to expose the patient for ``duration``
days, giving a seed interval [d, d + duration].  Seed intervals of the same
patient and drug whose gap is at most the ``persistence window`` are merged
into one era.  The two parameters can be fixed (the common convention is 30
days for both) or estimated from the data:

* For each drug with enough prescription history, pool the day gaps between
  consecutive same-patient prescriptions, sort them, and fit a one-break
  segmented regression.  Chronic-use drugs show a long run of short,
  regular refill gaps followed by an abrupt jump; the break value estimates
  the refill period.
* A second-level break on the sorted per-drug break values splits drugs
  into a regularly-refilled ("recurrent") regime and everything else.
* Recurrent drugs get duration = window = half the mean refill period of
  the regime; the rest get a short fixed duration and no merging.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .changepoint import ChangePointFit, fit_changepoint
from .cohort import Cohort

# 0.04 year, rounded to whole days: exposure length assumed for drugs
# without a refill pattern.
NON_RECURRENT_DURATION_DAYS = round(0.04 * 365.25)
CDM_DEFAULT_DAYS = 30
MIN_GAPS_DEFAULT = 50


def round_half_up(x: float) -> int:
    """Round to nearest integer with .5 going up (3.5 -> 4, 4.5 -> 5)."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class DrugEra(object):
    """One continuous exposure interval, bounds in days, inclusive."""

    patient: str
    drug: str
    start: int
    end: int

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"era ends before it starts: {self}")


@dataclass(frozen=True)
class DrugEraParams:
    """Era-construction parameters for one drug."""

    recurrent: bool
    duration_days: int
    persistence_window_days: int


@dataclass(frozen=True)
class EraParams:
    """Per-drug era parameters plus how they were obtained."""

    mode: str  # "changepoint" or "cdm30"
    per_drug: dict[str, DrugEraParams]
    mean_refill_days: float | None = None
    changepoints: dict[str, ChangePointFit | None] = field(default_factory=dict)
    gap_counts: dict[str, int] = field(default_factory=dict)
    second_level: ChangePointFit | None = None
    warnings: tuple[str, ...] = ()

    def for_drug(self, drug_id: str) -> DrugEraParams:
        return self.per_drug[drug_id]


def compute_gaps(cohort: Cohort, drug_index: int) -> np.ndarray:
    """Pooled positive day gaps between consecutive same-patient prescriptions.

    Gaps are pooled over all patients and returned sorted ascending.  A
    patient with a single prescription of the drug contributes nothing.
    """
    chunks = []
    for patient in cohort.patients:
        days = patient.rx_days.get(drug_index)
        if days is not None and days.shape[0] >= 2:
            chunks.append(np.diff(days))
    if not chunks:
        return np.empty(0, dtype=np.int64)
    gaps = np.concatenate(chunks)
    gaps.sort()
    return gaps


def merge_intervals(intervals, persistence_window: int) -> list[tuple[int, int]]:
    """Merge sorted [start, end] intervals whose gap is <= the window."""
    merged: list[tuple[int, int]] = []
    for start, end in intervals:
        if merged and start - merged[-1][1] <= persistence_window:
            prev_start, prev_end = merged[-1]
            merged[-1] = (prev_start, max(prev_end, end))
        else:
            merged.append((int(start), int(end)))
    return merged


def eras_for_days(days, duration: int, persistence_window: int) -> list[tuple[int, int]]:
    """Seed one interval [d, d + duration] per prescription day and merge."""
    ordered = sorted(int(d) for d in days)
    return merge_intervals(((d, d + duration) for d in ordered), persistence_window)


def classify_recurrent(
    fits: dict[str, ChangePointFit | None],
) -> tuple[dict[str, bool], float | None, ChangePointFit | None, list[str]]:
    """Split drugs into recurrent / non-recurrent from their gap breaks.

    ``fits`` maps drug id to its gap-sequence break fit (None when the drug
    had too few gaps to try).  Returns the per-drug flags, the recurrent
    regime's mean refill period in days (None when no recurrent regime
    was found), the
    second-level fit, and any warnings.
    """
    warnings: list[str] = []
    flags = {drug: False for drug in fits}

    valid = [
        (fit.value_at_psi, drug)
        for drug, fit in fits.items()
        if fit is not None and fit.value_at_psi is not None
    ]
    if len(valid) < 2:
        warnings.append(
            "fewer than two drugs with a usable refill-gap break; "
            "treating every drug as non-recurrent"
        )
        return flags, None, None, warnings

    valid.sort()  # by break value, then drug id for deterministic ties
    values = np.array([v for v, _ in valid], dtype=np.float64)
    second = fit_changepoint(values)
    if second.psi is None:
        warnings.append(
            "no break found in the per-drug refill-period sequence; "
            "treating every drug as non-recurrent"
        )
        return flags, None, second, warnings

    recurrent_values = []
    for rank, (value, drug) in enumerate(valid, start=1):
        if rank <= second.psi:
            flags[drug] = True
            recurrent_values.append(value)
    if not recurrent_values:
        warnings.append(
            "refill-period break left no drugs below it; "
            "treating every drug as non-recurrent"
        )
        return flags, None, second, warnings

    mean_refill = float(np.mean(recurrent_values))
    return flags, mean_refill, second, warnings


def estimate_era_params(
    cohort: Cohort,
    *,
    mode: str = "changepoint",
    min_gaps: int = MIN_GAPS_DEFAULT,
    threads: int = 1,
) -> EraParams:
    """Choose per-drug era parameters.

    ``mode="cdm30"`` assigns the fixed 30/30 convention to every drug.
    ``mode="changepoint"`` estimates refill behaviour from the data as
    described in the module docstring; drugs with fewer than ``min_gaps``
    pooled gaps are never classified recurrent.
    """
    if mode == "cdm30":
        params = DrugEraParams(
            recurrent=True,
            duration_days=CDM_DEFAULT_DAYS,
            persistence_window_days=CDM_DEFAULT_DAYS,
        )
        return EraParams(mode=mode, per_drug={d: params for d in cohort.drug_ids})
    if mode != "changepoint":
        raise ValueError(f"unknown era parameter mode: {mode!r}")

    def gaps_and_fit(drug_index: int) -> tuple[int, ChangePointFit | None]:
        gaps = compute_gaps(cohort, drug_index)
        if gaps.shape[0] < min_gaps:
            return gaps.shape[0], None
        return gaps.shape[0], fit_changepoint(gaps.astype(np.float64))

    indices = range(cohort.n_drugs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(gaps_and_fit, indices))
    else:
        results = [gaps_and_fit(i) for i in indices]

    gap_counts = {cohort.drug_ids[i]: results[i][0] for i in indices}
    fits = {cohort.drug_ids[i]: results[i][1] for i in indices}

    flags, mean_refill, second, warnings = classify_recurrent(fits)

    non_recurrent = DrugEraParams(
        recurrent=False,
        duration_days=NON_RECURRENT_DURATION_DAYS,
        persistence_window_days=0,
    )
    if mean_refill is None:
        per_drug = {d: non_recurrent for d in cohort.drug_ids}
    else:
        span = round_half_up(mean_refill / 2.0)
        recurrent = DrugEraParams(
            recurrent=True, duration_days=span, persistence_window_days=span
        )
        per_drug = {
            d: (recurrent if flags.get(d, False) else non_recurrent)
            for d in cohort.drug_ids
        }

    return EraParams(
        mode=mode,
        per_drug=per_drug,
        mean_refill_days=mean_refill,
        changepoints=fits,
        gap_counts=gap_counts,
        second_level=second,
        warnings=tuple(warnings),
    )


def build_eras(cohort: Cohort, params: EraParams) -> list[DrugEra]:
    """Construct all drug eras for the cohort, deterministically ordered.

    Output is sorted by patient id, then drug id, then era start.
    """
    eras: list[DrugEra] = []
    for patient in cohort.patients:
        for drug_index in sorted(patient.rx_days):
            drug_id = cohort.drug_ids[drug_index]
            p = params.for_drug(drug_id)
            for start, end in eras_for_days(
                patient.rx_days[drug_index], p.duration_days, p.persistence_window_days
            ):
                eras.append(DrugEra(patient.patient_id, drug_id, start, end))
    return eras
