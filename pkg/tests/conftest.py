"""Shared fixtures for the drugshift test suite."""
from __future__ import annotations

import numpy as np
import pytest

from drugshift.cohort import (
    MeasurementRecord,
    PrescriptionRecord,
    validate_cohort,
)


def make_records(rx_rows, meas_rows):
    """Build record lists from (patient, drug, day) and (patient, day, value) tuples."""
    rx = [PrescriptionRecord(p, d, day) for p, d, day in rx_rows]
    meas = [MeasurementRecord(p, day, v) for p, day, v in meas_rows]
    return rx, meas


def make_cohort(rx_rows, meas_rows, **kwargs):
    rx, meas = make_records(rx_rows, meas_rows)
    return validate_cohort(rx, meas, **kwargs)


def random_cohort(rng: np.random.Generator, *, n_patients=6, n_drugs=3, span=400):
    """Small random cohort: every patient gets 2-8 measurements, drugs are optional."""
    rx_rows = []
    meas_rows = []
    drugs = [f"d{m}" for m in range(n_drugs)]
    for i in range(n_patients):
        pid = f"p{i}"
        n_meas = int(rng.integers(2, 9))
        days = rng.choice(span, size=n_meas, replace=False)
        for day in sorted(int(v) for v in days):
            meas_rows.append((pid, day, float(rng.normal(100.0, 10.0))))
        for drug in drugs:
            if rng.random() < 0.6:
                n_rx = int(rng.integers(1, 5))
                rx_days = rng.choice(span, size=n_rx, replace=False)
                for day in rx_days:
                    rx_rows.append((pid, drug, int(day)))
    return make_cohort(rx_rows, meas_rows)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
