"""End-to-end library plumbing around the fit and baseline paths."""
from __future__ import annotations

import numpy as np
import pytest

from drugshift.pipeline import run_fit, run_pm
from drugshift.simulate import SynthConfig, generate
from drugshift.cohort import validate_cohort


@pytest.fixture(scope="module")
def small_cohort():
    cfg = SynthConfig(
        seed=21,
        n_patients=60,
        n_drugs=4,
        effects={0: -6.0},
        noise_sd=0.5,
        span_days=1461,
    )
    data = generate(cfg)
    return validate_cohort(data.prescriptions, data.measurements)


def test_run_fit_info_and_outputs(small_cohort):
    out = run_fit(small_cohort, model="csccs", era_mode="cdm30", lam=0.0, min_count=1)
    assert out.model == "csccs"
    assert out.solution is not None
    assert out.path is None
    info = out.info
    for key in (
        "model",
        "era_mode",
        "n_rows",
        "n_drugs_fitted",
        "min_count",
        "lambda",
        "support_size",
        "objective",
        "kkt_violation",
        "sweeps",
        "converged",
    ):
        assert key in info
    assert info["lambda"] == 0.0
    assert info["kkt_violation"] <= 1e-8
    scores = dict(out.ranked.entries)
    assert scores["drug_000"] < -4.0


def test_run_fit_path_mode_populates_selection(small_cohort):
    out = run_fit(
        small_cohort,
        model="csccs",
        era_mode="cdm30",
        target_support=2,
        n_lambdas=10,
        min_count=1,
    )
    assert out.path is not None
    assert out.solution is out.path.selected_solution
    assert out.info["target_support"] == 2
    # Unselected drugs sit in the zero block, not among scored entries.
    assert set(out.ranked.drugs) == set(d for d in out.design.drug_ids)
    for drug, score in out.ranked.entries:
        assert score != 0.0


def test_run_fit_era_params_reuse_is_identical(small_cohort):
    first = run_fit(small_cohort, model="csccs", era_mode="cdm30", lam=1.0, min_count=1)
    second = run_fit(
        small_cohort,
        model="csccsa",
        era_params=first.era_params,
        lam=1.0,
        min_count=1,
    )
    assert second.era_params is first.era_params
    assert second.model == "csccsa"
    assert second.info["era_mode"] == "cdm30"
    assert second.info["max_pair_gap_days"] == 1461
    third = run_fit(
        small_cohort,
        model="csccsa",
        era_mode="cdm30",
        lam=1.0,
        min_count=1,
    )
    assert np.allclose(
        [s for _, s in second.ranked.entries],
        [s for _, s in third.ranked.entries],
    )


def test_run_fit_lambda_and_design_kinds(small_cohort):
    centered = run_fit(small_cohort, model="csccs", era_mode="cdm30", lam=0.5, min_count=1)
    differenced = run_fit(
        small_cohort, model="csccsa", era_mode="cdm30", lam=0.5, min_count=1
    )
    assert centered.design.kind == "centered"
    assert differenced.design.kind == "differenced"
    with pytest.raises(ValueError):
        run_fit(small_cohort, model="unknown", lam=0.0)


def test_run_pm(small_cohort):
    ranked, counts, info = run_pm(small_cohort)
    assert ranked.method == "pm"
    assert info["window_days"] == 730
    assert set(counts) >= {d for d, _ in ranked.entries}
    scores = dict(ranked.entries)
    assert scores["drug_000"] < 0.0
