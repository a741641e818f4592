"""Detect drugs that shift a continuous clinical measurement.

The package turns longitudinal prescription and measurement events into
within-patient regression problems, fits them with an L1 penalty, and
ranks drugs by the fitted shift.  See the README for the pipeline
walkthrough.
"""

from .changepoint import ChangePointFit, fit_changepoint
from .cohort import (
    Cohort,
    MeasurementRecord,
    PrescriptionRecord,
    day_from_iso,
    day_to_iso,
    validate_cohort,
)
from .design import (
    DesignMatrix,
    ExposureMatrix,
    build_centered_design,
    build_differenced_design,
    compute_exposure,
    filter_columns,
    recover_baselines,
)
from .eras import (
    DrugEra,
    DrugEraParams,
    EraParams,
    build_eras,
    classify_recurrent,
    compute_gaps,
    estimate_era_params,
)
from .errors import (
    CohortError,
    DesignError,
    DrugshiftError,
    EvaluationError,
    IngestError,
    SynthConfigError,
)
from .ingest import IngestConfig, load_cohort, parse_measurements, parse_prescriptions
from .lasso import (
    LassoProblem,
    LassoSolution,
    PathResult,
    fit_lasso,
    lasso_path,
    soft_threshold,
)
from .pairwise_mean import PmScore, pm_scores
from .pipeline import run_fit, run_pm
from .ranking import (
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
from .simulate import SynthConfig, SynthData, SynthTruth, generate, write_dataset

__version__ = "0.1.0"

__all__ = [
    "ChangePointFit",
    "Cohort",
    "CohortError",
    "DesignError",
    "DesignMatrix",
    "DrugEra",
    "DrugEraParams",
    "DrugshiftError",
    "EraParams",
    "EvalResult",
    "EvaluationError",
    "ExposureMatrix",
    "IngestConfig",
    "IngestError",
    "LabelSet",
    "LassoProblem",
    "LassoSolution",
    "MeasurementRecord",
    "PathResult",
    "PmScore",
    "PrescriptionRecord",
    "RankedList",
    "SynthConfig",
    "SynthConfigError",
    "SynthData",
    "SynthTruth",
    "auroc",
    "build_centered_design",
    "build_differenced_design",
    "build_eras",
    "classify_recurrent",
    "compute_exposure",
    "compute_gaps",
    "day_from_iso",
    "day_to_iso",
    "ensemble_rank",
    "estimate_era_params",
    "evaluate_ranked",
    "filter_columns",
    "fit_changepoint",
    "fit_lasso",
    "generate",
    "lasso_path",
    "load_cohort",
    "parse_measurements",
    "parse_prescriptions",
    "pm_scores",
    "precision_at_k",
    "recover_baselines",
    "restrict",
    "roc_points",
    "run_fit",
    "run_pm",
    "soft_threshold",
    "union_top_k",
    "validate_cohort",
    "write_dataset",
]
