"""End-to-end orchestration: cohort -> eras -> design -> fit -> ranking.

The command line is a thin wrapper over these functions; tests call them
directly so the two paths cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .design import (
    DEFAULT_MAX_PAIR_GAP_DAYS,
    MIN_COLUMN_COUNT_DEFAULT,
    DesignMatrix,
    build_centered_design,
    build_differenced_design,
    compute_exposure,
    filter_columns,
)
from .eras import MIN_GAPS_DEFAULT, DrugEra, EraParams, build_eras, estimate_era_params
from .lasso import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_N_LAMBDAS,
    DEFAULT_TARGET_SUPPORT,
    DEFAULT_TOLERANCE,
    LassoProblem,
    LassoSolution,
    PathResult,
    fit_lasso,
    lasso_path,
)
from .pairwise_mean import DEFAULT_WINDOW_DAYS, pm_scores
from .ranking import RankedList

MODELS = ("csccs", "csccsa")


@dataclass(frozen=True)
class FitOutput:
    """Everything a fit produces, ready for serialization."""

    model: str
    era_params: EraParams
    eras: list[DrugEra]
    design: DesignMatrix
    solution: LassoSolution
    path: PathResult | None
    ranked: RankedList
    counts: dict[str, int]
    info: dict


def assemble_design(
    cohort: Cohort,
    *,
    model: str,
    era_params: EraParams | None = None,
    era_mode: str = "changepoint",
    min_gaps: int = MIN_GAPS_DEFAULT,
    max_pair_gap_days: int = DEFAULT_MAX_PAIR_GAP_DAYS,
    min_count: int = MIN_COLUMN_COUNT_DEFAULT,
    threads: int = 1,
    standardize: bool = False,
) -> tuple[EraParams, list[DrugEra], DesignMatrix]:
    """Era parameters, eras, and the filtered design for one model."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}, expected one of {MODELS}")
    params = era_params or estimate_era_params(
        cohort, mode=era_mode, min_gaps=min_gaps, threads=threads
    )
    eras = build_eras(cohort, params)
    exposure = compute_exposure(cohort, eras)
    if model == "csccs":
        design = build_centered_design(cohort, exposure, standardize=standardize)
    else:
        design = build_differenced_design(
            cohort, exposure, max_pair_gap_days=max_pair_gap_days, standardize=standardize
        )
    return params, eras, filter_columns(design, min_count)


def ranked_from_beta(
    model: str, design: DesignMatrix, beta: np.ndarray
) -> tuple[RankedList, dict[str, int]]:
    """Coefficients (in raw exposure units) as a ranking plus counts."""
    raw = beta / design.column_scales
    scores = {drug: float(raw[m]) for m, drug in enumerate(design.drug_ids)}
    ranked = RankedList.from_scores(model, scores, zero_scores_to_block=True)
    counts = {
        drug: int(design.column_counts[m]) for m, drug in enumerate(design.drug_ids)
    }
    return ranked, counts


def run_fit(
    cohort: Cohort,
    *,
    model: str = "csccs",
    era_params: EraParams | None = None,
    era_mode: str = "changepoint",
    min_gaps: int = MIN_GAPS_DEFAULT,
    max_pair_gap_days: int = DEFAULT_MAX_PAIR_GAP_DAYS,
    min_count: int = MIN_COLUMN_COUNT_DEFAULT,
    lam: float | None = None,
    target_support: int = DEFAULT_TARGET_SUPPORT,
    n_lambdas: int = DEFAULT_N_LAMBDAS,
    tolerance: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    threads: int = 1,
    standardize: bool = False,
) -> FitOutput:
    """Fit one model, either at a fixed penalty or along a path.

    With ``lam`` given, a single penalized problem is solved; otherwise a
    path is run and the grid point with support size closest to
    ``target_support`` is selected.
    """
    params, eras, design = assemble_design(
        cohort,
        model=model,
        era_params=era_params,
        era_mode=era_mode,
        min_gaps=min_gaps,
        max_pair_gap_days=max_pair_gap_days,
        min_count=min_count,
        threads=threads,
        standardize=standardize,
    )

    warnings = list(params.warnings)
    if lam is not None:
        solution = fit_lasso(
            LassoProblem(design, lam, tolerance=tolerance, max_sweeps=max_sweeps)
        )
        path = None
        used_lambda = float(lam)
    else:
        path = lasso_path(
            design,
            n_lambdas=n_lambdas,
            target_support=target_support,
            tolerance=tolerance,
            max_sweeps=max_sweeps,
        )
        solution = path.selected_solution
        used_lambda = path.selected_lambda
        warnings.extend(path.warnings)

    if not solution.converged:
        warnings.append(
            f"solver did not converge (kkt violation {solution.kkt_violation:.3g})"
        )

    ranked, counts = ranked_from_beta(model, design, solution.beta)
    info = {
        "model": model,
        "era_mode": params.mode,
        "mean_refill_days": params.mean_refill_days,
        "n_rows": design.n_rows,
        "n_drugs_fitted": design.n_drugs,
        "min_count": min_count,
        "lambda": used_lambda,
        "target_support": None if lam is not None else target_support,
        "support_size": solution.support_size,
        "objective": solution.objective,
        "kkt_violation": solution.kkt_violation,
        "sweeps": solution.sweeps,
        "converged": solution.converged,
        "warnings": warnings,
    }
    if model == "csccsa":
        info["max_pair_gap_days"] = max_pair_gap_days
    return FitOutput(
        model=model,
        era_params=params,
        eras=eras,
        design=design,
        solution=solution,
        path=path,
        ranked=ranked,
        counts=counts,
        info=info,
    )


def run_pm(
    cohort: Cohort, *, window_days: int = DEFAULT_WINDOW_DAYS
) -> tuple[RankedList, dict[str, int], dict]:
    """Score every drug with the paired before/after baseline."""
    scored = pm_scores(cohort, window_days=window_days)
    ranked = RankedList.from_scores("pm", {s.drug: s.score for s in scored})
    counts = {s.drug: s.count for s in scored}
    info = {
        "model": "pm",
        "window_days": window_days,
        "n_drugs_scored": len(scored),
        "n_drugs_total": cohort.n_drugs,
    }
    return ranked, counts, info
