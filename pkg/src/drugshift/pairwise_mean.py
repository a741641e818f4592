"""Before/after mean-shift baseline around each drug's first prescription.

For one drug and one patient, take the mean of the patient's measurements
in the two years before the first prescription of that drug and the mean
in the two years after it (the prescription day itself belongs to neither
side), and difference them, after minus before.  The drug's score is the
average of this difference over all patients with at least one
measurement on each side.  Negative scores mean the measurement tends to
drop after the drug is started.

No baseline removal and no adjustment for co-prescribed drugs happens
here; the score is deliberately naive and serves as a comparison point
for the regression-based rankings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .cohort import Cohort

DEFAULT_WINDOW_DAYS = 730


@dataclass(frozen=True)
class PmScore:
    """Mean before/after shift for one drug over ``count`` patients."""

    drug: str
    score: float
    count: int


def pm_scores(
    cohort: Cohort,
    *,
    window_days: int = DEFAULT_WINDOW_DAYS,
    drugs: Iterable[str] | None = None,
) -> list[PmScore]:
    """Score drugs by their before/after measurement shift.

    Returns one entry per drug with at least one contributing patient,
    in drug id order.  ``drugs`` restricts scoring to a subset.
    """
    if drugs is None:
        wanted = range(cohort.n_drugs)
    else:
        wanted = sorted(cohort.drug_index(d) for d in set(drugs))

    shifts: dict[int, list[float]] = {m: [] for m in wanted}
    wanted_set = set(wanted)

    for patient in cohort.patients:
        days = patient.meas_days
        values = patient.meas_values
        for drug_index, rx in patient.rx_days.items():
            if drug_index not in wanted_set:
                continue
            t0 = int(rx[0])
            before_lo = np.searchsorted(days, t0 - window_days, side="left")
            before_hi = np.searchsorted(days, t0, side="left")
            after_lo = np.searchsorted(days, t0, side="right")
            after_hi = np.searchsorted(days, t0 + window_days, side="right")
            if before_hi == before_lo or after_hi == after_lo:
                continue
            before = float(values[before_lo:before_hi].mean())
            after = float(values[after_lo:after_hi].mean())
            shifts[drug_index].append(after - before)

    out = []
    for m in wanted:
        deltas = shifts[m]
        if deltas:
            out.append(
                PmScore(
                    drug=cohort.drug_ids[m],
                    score=float(np.mean(deltas)),
                    count=len(deltas),
                )
            )
    return out
