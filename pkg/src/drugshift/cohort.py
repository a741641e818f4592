"""Core domain model: day-granular EHR events and the case-series cohort.

All dates are integer day offsets from 1970-01-01 ("days"); there is no
sub-day resolution anywhere in the pipeline.  A cohort admits only patients
with at least one measurement (each patient acts as their own control), and
interns patient and drug identifiers to dense, contiguous integer indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import math

import numpy as np

from .errors import CohortError

_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()


def day_from_date(d: date) -> int:
    """Convert a calendar date to days since 1970-01-01."""
    return d.toordinal() - _EPOCH_ORDINAL


def day_from_iso(text: str) -> int:
    """Parse an ISO-8601 calendar date (YYYY-MM-DD) to a day offset."""
    return day_from_date(date.fromisoformat(text))


def day_to_iso(day: int) -> str:
    """Render a day offset as an ISO-8601 calendar date."""
    return (date(1970, 1, 1) + timedelta(days=int(day))).isoformat()


@dataclass(frozen=True)
class PrescriptionRecord:
    """One prescription event: a drug issued to a patient on a day."""

    patient: str
    drug: str
    date: int


@dataclass(frozen=True)
class MeasurementRecord:
    """One measurement event: a numeric value for a patient on a day."""

    patient: str
    date: int
    value: float


@dataclass(frozen=True)
class PatientSeries:
    """All retained events of one admitted patient.

    Measurement days are strictly increasing; prescription days are sorted
    per drug and deduplicated.  Arrays are read-only.
    """

    patient_id: str
    meas_days: np.ndarray
    meas_values: np.ndarray
    rx_days: Mapping[int, np.ndarray]  # drug index -> sorted days

    @property
    def n_measurements(self) -> int:
        return int(self.meas_days.shape[0])


@dataclass(frozen=True)
class CohortSummary:
    """What was kept and what was dropped while building a cohort."""

    patients_seen: int
    patients_admitted: int
    patients_dropped_no_measurements: int
    measurements_kept: int
    duplicate_measurements_merged: int
    prescriptions_seen: int
    prescriptions_kept: int
    duplicate_prescriptions_dropped: int
    prescriptions_of_dropped_patients: int

    def lines(self) -> list[str]:
        out = [
            f"patients admitted: {self.patients_admitted} of {self.patients_seen}"
            f" ({self.patients_dropped_no_measurements} without measurements dropped)",
            f"measurements kept: {self.measurements_kept}"
            f" ({self.duplicate_measurements_merged} same-day duplicates merged)",
            f"prescriptions kept: {self.prescriptions_kept} of {self.prescriptions_seen}",
        ]
        if self.duplicate_prescriptions_dropped:
            out.append(
                f"duplicate prescriptions dropped: {self.duplicate_prescriptions_dropped}"
            )
        if self.prescriptions_of_dropped_patients:
            out.append(
                "prescriptions of dropped patients ignored: "
                f"{self.prescriptions_of_dropped_patients}"
            )
        return out


@dataclass(frozen=True)
class Cohort:
    """Immutable case-series cohort: admitted patients plus drug dictionary.

    Patients and drugs are interned to dense indices 0..N-1 / 0..M-1 in
    lexicographic id order, so construction is independent of input order.
    The drug dictionary covers every drug seen in the prescription stream,
    including drugs prescribed only to dropped patients (their exposure
    columns are simply empty).
    """

    patients: tuple[PatientSeries, ...]
    drug_ids: tuple[str, ...]
    summary: CohortSummary
    _patient_index: Mapping[str, int] = field(repr=False, default_factory=dict)
    _drug_index: Mapping[str, int] = field(repr=False, default_factory=dict)

    @property
    def n_patients(self) -> int:
        return len(self.patients)

    @property
    def n_drugs(self) -> int:
        return len(self.drug_ids)

    @property
    def n_measurements(self) -> int:
        return sum(p.n_measurements for p in self.patients)

    def patient_index(self, patient_id: str) -> int:
        return self._patient_index[patient_id]

    def drug_index(self, drug_id: str) -> int:
        return self._drug_index[drug_id]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def validate_cohort(
    prescriptions: Iterable[PrescriptionRecord],
    measurements: Iterable[MeasurementRecord],
    *,
    dedupe_policy: str = "strict",
    bounds: tuple[int, int] | None = None,
) -> Cohort:
    """Build a validated cohort from raw event records.

    Patients without any measurement are dropped (case-series rule) and the
    drop is counted in the summary.  Duplicate same-day measurements are an
    error under ``dedupe_policy="strict"`` and are averaged under ``"mean"``;
    exact duplicate prescription triples collapse to one record.

    Raises ``CohortError`` on non-finite values, on dates outside ``bounds``
    (inclusive day offsets, when given), and on same-day measurement
    conflicts in strict mode.
    """
    if dedupe_policy not in ("strict", "mean"):
        raise CohortError(f"unknown dedupe policy: {dedupe_policy!r}")

    lo, hi = bounds if bounds is not None else (None, None)

    def check_bounds(day: int, what: str) -> None:
        if lo is not None and (day < lo or day > hi):
            raise CohortError(
                f"{what} on {day_to_iso(day)} outside observation bounds "
                f"[{day_to_iso(lo)}, {day_to_iso(hi)}]"
            )

    # Group measurements per patient and day.
    by_patient: dict[str, dict[int, list[float]]] = {}
    n_meas_rows = 0
    for rec in measurements:
        n_meas_rows += 1
        if not math.isfinite(rec.value):
            raise CohortError(
                f"non-finite measurement for patient {rec.patient!r} "
                f"on {day_to_iso(rec.date)}"
            )
        check_bounds(rec.date, f"measurement of patient {rec.patient!r}")
        by_patient.setdefault(rec.patient, {}).setdefault(rec.date, []).append(rec.value)

    duplicates_merged = 0
    for pid, per_day in by_patient.items():
        for day, values in per_day.items():
            if len(values) == 1:
                continue
            if dedupe_policy == "strict" and len(set(values)) > 1:
                raise CohortError(
                    f"duplicate measurements for patient {pid!r} on "
                    f"{day_to_iso(day)} in strict mode"
                )
            duplicates_merged += len(values) - 1
            # Sorted before averaging so the result is input-order independent.
            per_day[day] = [float(np.mean(sorted(values)))]

    admitted = sorted(by_patient)
    patient_index = {pid: i for i, pid in enumerate(admitted)}

    # Prescriptions: dedupe exact triples, intern every drug seen.
    rx_seen: set[tuple[str, str, int]] = set()
    rx_by_patient: dict[str, dict[str, list[int]]] = {}
    drug_names: set[str] = set()
    rx_patients: set[str] = set()
    n_rx_rows = 0
    n_rx_dupes = 0
    n_rx_dropped_patient = 0
    for rec in prescriptions:
        n_rx_rows += 1
        check_bounds(rec.date, f"prescription of patient {rec.patient!r}")
        rx_patients.add(rec.patient)
        key = (rec.patient, rec.drug, rec.date)
        if key in rx_seen:
            n_rx_dupes += 1
            continue
        rx_seen.add(key)
        drug_names.add(rec.drug)
        if rec.patient not in patient_index:
            n_rx_dropped_patient += 1
            continue
        rx_by_patient.setdefault(rec.patient, {}).setdefault(rec.drug, []).append(rec.date)

    if not admitted:
        raise CohortError("empty cohort: no patient has a measurement")

    drug_ids = tuple(sorted(drug_names))
    drug_index = {d: m for m, d in enumerate(drug_ids)}

    patients = []
    for pid in admitted:
        per_day = by_patient[pid]
        days = np.array(sorted(per_day), dtype=np.int64)
        values = np.array([per_day[d][0] for d in days], dtype=np.float64)
        rx: dict[int, np.ndarray] = {}
        for drug, rx_dates in sorted(rx_by_patient.get(pid, {}).items()):
            rx[drug_index[drug]] = _freeze(np.array(sorted(rx_dates), dtype=np.int64))
        patients.append(
            PatientSeries(
                patient_id=pid,
                meas_days=_freeze(days),
                meas_values=_freeze(values),
                rx_days=rx,
            )
        )

    patients_seen = len(set(by_patient) | rx_patients)
    summary = CohortSummary(
        patients_seen=patients_seen,
        patients_admitted=len(admitted),
        patients_dropped_no_measurements=patients_seen - len(admitted),
        measurements_kept=sum(p.n_measurements for p in patients),
        duplicate_measurements_merged=duplicates_merged,
        prescriptions_seen=n_rx_rows,
        prescriptions_kept=sum(len(v) for p in rx_by_patient.values() for v in p.values()),
        duplicate_prescriptions_dropped=n_rx_dupes,
        prescriptions_of_dropped_patients=n_rx_dropped_patient,
    )
    return Cohort(
        patients=tuple(patients),
        drug_ids=drug_ids,
        summary=summary,
        _patient_index=patient_index,
        _drug_index=drug_index,
    )
