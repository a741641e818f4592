"""Binary exposure matrices and the two regression designs.

Rows are measurement occasions.  A cell (row, drug) is 1 when the
measurement day falls inside one of the patient's eras for that drug,
bounds inclusive.  Two designs are built on top:

* the centered design: subtract each patient's own mean from both the
  response and every exposure column, which removes the per-patient
  baseline exactly (patients with a single measurement carry no signal
  and are dropped);
* the differenced design: subtract each consecutive same-patient pair of
  measurements (earlier minus later) when the pair is at most ``max_pair
  _gap_days`` apart, which additionally cancels any drift shared by a
  pair.

Both emit scipy CSR matrices with exact nonzero structure (no stored
zeros), so downstream solvers can trust sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import sparse

from .cohort import Cohort
from .eras import DrugEra
from .errors import DesignError

# Four years, in days: widest measurement pair admitted to the
# differenced design.
DEFAULT_MAX_PAIR_GAP_DAYS = round(4 * 365.25)

MIN_COLUMN_COUNT_DEFAULT = 8


@dataclass(frozen=True)
class ExposureMatrix:
    """Binary measurement-by-drug exposure indicator.

    Row order is cohort patient order, measurement days ascending within
    a patient.
    """

    matrix: sparse.csr_matrix
    row_patient: np.ndarray  # patient index per row
    row_day: np.ndarray  # measurement day per row
    patient_offsets: np.ndarray  # row slice of patient i is offsets[i]:offsets[i+1]


@dataclass(frozen=True)
class DesignMatrix:
    """One assembled regression problem.

    ``column_counts`` holds, per drug, the raw exposure column sums over
    every measurement occasion in the cohort (before centering or
    differencing, and regardless of which rows the design kept), so both
    design kinds report the same counts.  ``column_scales``
    is 1 everywhere unless the design was standardized, in which case
    fitted coefficients refer to the scaled columns and must be divided
    by the scale to return to original units.
    """

    kind: str  # "centered" or "differenced"
    y: np.ndarray
    X: sparse.csr_matrix
    drug_ids: tuple[str, ...]
    column_counts: np.ndarray
    column_scales: np.ndarray
    row_patient: np.ndarray
    row_day: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_drugs(self) -> int:
        return len(self.drug_ids)


def compute_exposure(cohort: Cohort, eras: Sequence[DrugEra]) -> ExposureMatrix:
    """Mark which measurements fall inside which drug eras."""
    offsets = np.zeros(cohort.n_patients + 1, dtype=np.int64)
    for i, patient in enumerate(cohort.patients):
        offsets[i + 1] = offsets[i] + patient.n_measurements
    n_rows = int(offsets[-1])

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    for era in eras:
        pi = cohort.patient_index(era.patient)
        days = cohort.patients[pi].meas_days
        lo = int(np.searchsorted(days, era.start, side="left"))
        hi = int(np.searchsorted(days, era.end, side="right"))
        if hi > lo:
            rows.append(np.arange(offsets[pi] + lo, offsets[pi] + hi, dtype=np.int64))
            cols.append(np.full(hi - lo, cohort.drug_index(era.drug), dtype=np.int64))

    if rows:
        row_idx = np.concatenate(rows)
        col_idx = np.concatenate(cols)
        data = np.ones(row_idx.shape[0], dtype=np.float64)
    else:
        row_idx = np.empty(0, dtype=np.int64)
        col_idx = np.empty(0, dtype=np.int64)
        data = np.empty(0, dtype=np.float64)

    # Eras of one patient and drug are disjoint after merging, so no
    # duplicate coordinates can occur and the matrix stays strictly binary.
    matrix = sparse.coo_matrix(
        (data, (row_idx, col_idx)), shape=(n_rows, cohort.n_drugs)
    ).tocsr()

    row_patient = np.repeat(
        np.arange(cohort.n_patients, dtype=np.int64), np.diff(offsets)
    )
    row_day = (
        np.concatenate([p.meas_days for p in cohort.patients])
        if cohort.patients
        else np.empty(0, dtype=np.int64)
    )
    return ExposureMatrix(
        matrix=matrix, row_patient=row_patient, row_day=row_day, patient_offsets=offsets
    )


def exposure_counts(exposure: ExposureMatrix) -> np.ndarray:
    """Per-drug L1 norm of the raw binary exposure columns."""
    return np.asarray(exposure.matrix.sum(axis=0)).ravel().astype(np.int64)


def _patient_block(exposure: ExposureMatrix, pi: int) -> sparse.csr_matrix:
    lo, hi = exposure.patient_offsets[pi], exposure.patient_offsets[pi + 1]
    return exposure.matrix[int(lo):int(hi)]


def _finish(
    kind: str,
    cohort: Cohort,
    exposure: ExposureMatrix,
    y_parts: list[np.ndarray],
    coo: tuple[list, list, list],
    row_patient: list[np.ndarray],
    row_day: list[np.ndarray],
    standardize: bool,
) -> DesignMatrix:
    if not y_parts:
        raise DesignError(f"no usable rows for the {kind} design")
    y = np.concatenate(y_parts)
    rows, cols, data = coo
    if rows:
        X = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(y.shape[0], cohort.n_drugs),
        ).tocsr()
    else:
        X = sparse.csr_matrix((y.shape[0], cohort.n_drugs), dtype=np.float64)

    scales = np.ones(cohort.n_drugs, dtype=np.float64)
    if standardize:
        sq = np.asarray(X.multiply(X).sum(axis=0)).ravel()
        rms = np.sqrt(sq / max(1, y.shape[0]))
        nonzero = rms > 0
        scales[nonzero] = rms[nonzero]
        X = X @ sparse.diags(1.0 / scales)
        X = X.tocsr()

    return DesignMatrix(
        kind=kind,
        y=y,
        X=X,
        drug_ids=cohort.drug_ids,
        column_counts=exposure_counts(exposure),
        column_scales=scales,
        row_patient=np.concatenate(row_patient),
        row_day=np.concatenate(row_day),
    )


def build_centered_design(
    cohort: Cohort, exposure: ExposureMatrix, *, standardize: bool = False
) -> DesignMatrix:
    """Within-patient mean-centered response and exposures.

    Patients with fewer than two measurements are dropped: centering maps
    their single row to zero on both sides.
    """
    y_parts: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    row_patient: list[np.ndarray] = []
    row_day: list[np.ndarray] = []

    out_row = 0
    for pi, patient in enumerate(cohort.patients):
        j = patient.n_measurements
        if j < 2:
            continue
        block = _patient_block(exposure, pi)
        y_parts.append(patient.meas_values - patient.meas_values.mean())
        row_patient.append(np.full(j, pi, dtype=np.int64))
        row_day.append(patient.meas_days)

        if block.nnz:
            active = np.unique(block.indices)
            dense = block[:, active].toarray()
            centered = dense - dense.mean(axis=0)
            r, c = np.nonzero(centered)
            rows.append(r + out_row)
            cols.append(active[c])
            data.append(centered[r, c])
        out_row += j

    return _finish(
        "centered",
        cohort,
        exposure,
        y_parts,
        (rows, cols, data),
        row_patient,
        row_day,
        standardize,
    )


def build_differenced_design(
    cohort: Cohort,
    exposure: ExposureMatrix,
    *,
    max_pair_gap_days: int = DEFAULT_MAX_PAIR_GAP_DAYS,
    standardize: bool = False,
) -> DesignMatrix:
    """Consecutive-pair differences, earlier measurement minus later.

    A pair of measurements j, j+1 of one patient is admitted when the
    days between them do not exceed ``max_pair_gap_days``.  Consecutive
    admitted pairs share their middle measurement.  Patients without any
    admitted pair are dropped.
    """
    y_parts: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    row_patient: list[np.ndarray] = []
    row_day: list[np.ndarray] = []

    out_row = 0
    for pi, patient in enumerate(cohort.patients):
        j = patient.n_measurements
        if j < 2:
            continue
        day_gaps = np.diff(patient.meas_days)
        keep = day_gaps <= max_pair_gap_days
        n_pairs = int(keep.sum())
        if n_pairs == 0:
            continue

        block = _patient_block(exposure, pi)
        y_diff = patient.meas_values[:-1] - patient.meas_values[1:]
        y_parts.append(y_diff[keep])
        row_patient.append(np.full(n_pairs, pi, dtype=np.int64))
        row_day.append(patient.meas_days[:-1][keep])

        if block.nnz:
            active = np.unique(block.indices)
            dense = block[:, active].toarray()
            diff = (dense[:-1] - dense[1:])[keep]
            r, c = np.nonzero(diff)
            rows.append(r + out_row)
            cols.append(active[c])
            data.append(diff[r, c])
        out_row += n_pairs

    return _finish(
        "differenced",
        cohort,
        exposure,
        y_parts,
        (rows, cols, data),
        row_patient,
        row_day,
        standardize,
    )


def recover_baselines(
    cohort: Cohort, exposure: ExposureMatrix, beta: np.ndarray
) -> dict[str, float]:
    """Per-patient baseline implied by fitted drug effects.

    Centering profiles the baselines out of the fit; given the fitted
    coefficients they come back as mean(y_i) - mean(x_i) . beta.  Only
    patients with two or more measurements (the ones the centered design
    keeps) are returned.
    """
    out: dict[str, float] = {}
    for pi, patient in enumerate(cohort.patients):
        if patient.n_measurements < 2:
            continue
        block = _patient_block(exposure, pi)
        xbar = np.asarray(block.mean(axis=0)).ravel()
        out[patient.patient_id] = float(patient.meas_values.mean() - xbar @ beta)
    return out


def filter_columns(design: DesignMatrix, min_count: int) -> DesignMatrix:
    """Drop drug columns whose raw exposure count is below ``min_count``.

    Applied before fitting, so rarely-prescribed drugs never enter the
    model.  The rows are untouched.
    """
    keep = design.column_counts >= min_count
    if keep.all():
        return design
    idx = np.flatnonzero(keep)
    return replace(
        design,
        X=design.X[:, idx].tocsr(),
        drug_ids=tuple(design.drug_ids[i] for i in idx),
        column_counts=design.column_counts[idx],
        column_scales=design.column_scales[idx],
    )
