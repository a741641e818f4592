"""Coordinate-descent lasso: KKT optimality, oracle equality, path selection."""
from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from scipy import sparse

from drugshift.design import DesignMatrix
from drugshift.lasso import (
    LassoProblem,
    fit_lasso,
    kkt_violation,
    lambda_max,
    lasso_path,
    soft_threshold,
)

from oracles import ista_lasso, lasso_objective


def make_design(X, y, kind="centered"):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = X.shape
    return DesignMatrix(
        kind=kind,
        y=y,
        X=sparse.csr_matrix(X),
        drug_ids=tuple(f"d{i}" for i in range(m)),
        column_counts=np.abs(X).sum(axis=0).astype(np.int64),
        column_scales=None,
        row_patient=np.zeros(n, dtype=np.int64),
        row_day=np.arange(n, dtype=np.int64),
    )


def single_drug_design():
    # Centered single-drug design: y = (5,5,-5,-5), x = (-.5,-.5,.5,.5).
    return make_design(
        [[-0.5], [-0.5], [0.5], [0.5]], [5.0, 5.0, -5.0, -5.0]
    )


def test_soft_threshold_unit_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0


def test_single_drug_closed_form():
    design = single_drug_design()
    assert fit_lasso(LassoProblem(design, lam=0.0)).beta[0] == pytest.approx(-10.0)
    assert fit_lasso(LassoProblem(design, lam=2.0)).beta[0] == pytest.approx(-8.0)
    for lam in (10.0, 11.0, 50.0):
        assert fit_lasso(LassoProblem(design, lam=lam)).beta[0] == 0.0


def test_lambda_max_zeroes_everything():
    design = single_drug_design()
    lmax = lambda_max(design)
    assert lmax == pytest.approx(10.0)
    solution = fit_lasso(LassoProblem(design, lam=lmax))
    assert np.all(solution.beta == 0.0)


def test_kkt_below_tolerance_on_random_problems(rng):
    for trial in range(30):
        n = int(rng.integers(5, 40))
        m = int(rng.integers(1, 10))
        X = rng.normal(size=(n, m))
        y = rng.normal(size=n)
        design = make_design(X, y)
        lam = float(rng.uniform(0.0, lambda_max(design)))
        solution = fit_lasso(LassoProblem(design, lam=lam))
        assert solution.kkt_violation <= 1e-8
        assert kkt_violation(design, solution.beta, lam) <= 1e-8


def test_objective_matches_proximal_oracle(rng):
    for trial in range(25):
        n = int(rng.integers(10, 50))
        m = int(rng.integers(2, 20))
        X = rng.normal(size=(n, m))
        y = rng.normal(size=n) * 3.0
        design = make_design(X, y)
        lam = float(rng.uniform(0.1, 0.9) * lambda_max(design))
        solution = fit_lasso(LassoProblem(design, lam=lam))
        oracle_beta = ista_lasso(X, y, lam)
        oracle_obj = lasso_objective(X, y, oracle_beta, lam)
        assert solution.objective <= oracle_obj + 1e-6 * max(1.0, abs(oracle_obj))
        assert abs(solution.objective - oracle_obj) <= 1e-6 * max(
            1.0, abs(oracle_obj)
        )


def test_duplicate_columns_non_unique_but_optimal():
    rng = np.random.default_rng(42)
    x = rng.normal(size=30)
    X = np.column_stack([x, x, rng.normal(size=30)])
    y = 2.0 * x + rng.normal(size=30) * 0.1
    design = make_design(X, y)
    lam = 0.5
    solution = fit_lasso(LassoProblem(design, lam=lam))
    assert solution.kkt_violation <= 1e-8
    oracle_beta = ista_lasso(X, y, lam)
    oracle_obj = lasso_objective(X, y, oracle_beta, lam)
    assert abs(solution.objective - oracle_obj) <= 1e-6 * max(1.0, abs(oracle_obj))


def test_warm_start_changes_nothing_material(rng):
    X = rng.normal(size=(40, 6))
    y = rng.normal(size=40)
    design = make_design(X, y)
    lam = 0.3 * lambda_max(design)
    cold = fit_lasso(LassoProblem(design, lam=lam))
    warm = fit_lasso(
        LassoProblem(design, lam=lam), warm_start=np.full(6, 0.123)
    )
    assert np.allclose(cold.beta, warm.beta, atol=1e-7)
    assert warm.kkt_violation <= 1e-8


def test_all_zero_matrix_rejected():
    design = make_design(np.zeros((4, 2)), [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        fit_lasso(LassoProblem(design, lam=1.0))


def test_problem_validation():
    design = single_drug_design()
    with pytest.raises(ValueError):
        LassoProblem(design, lam=-1.0)
    with pytest.raises(ValueError):
        LassoProblem(design, lam=0.0, tolerance=0.0)
    with pytest.raises(ValueError):
        LassoProblem(design, lam=0.0, max_sweeps=0)


def test_path_grid_shape_and_order(rng):
    X = rng.normal(size=(50, 8))
    y = rng.normal(size=50)
    design = make_design(X, y)
    path = lasso_path(design, n_lambdas=12, target_support=3)
    assert len(path.lambdas) == 12
    assert path.lambdas[0] == pytest.approx(lambda_max(design))
    assert path.lambdas[-1] == pytest.approx(lambda_max(design) * 1e-3)
    assert all(a > b for a, b in zip(path.lambdas, path.lambdas[1:]))
    assert path.support_sizes[0] == 0
    for solution in path.solutions:
        assert solution.kkt_violation <= 1e-8


def test_path_selects_closest_support_prefers_larger_lambda(rng):
    X = rng.normal(size=(60, 10))
    y = X[:, 0] * 3.0 - X[:, 1] * 2.0 + rng.normal(size=60) * 0.5
    design = make_design(X, y)
    path = lasso_path(design, n_lambdas=25, target_support=2)
    distances = [abs(s - 2) for s in path.support_sizes]
    best = min(distances)
    assert distances[path.selected_index] == best
    # First index achieving the minimum distance wins (largest penalty).
    assert path.selected_index == distances.index(best)
    assert path.selected_solution is path.solutions[path.selected_index]
    assert path.selected_lambda == path.lambdas[path.selected_index]


def test_path_target_unreachable_warns(rng):
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    design = make_design(X, y)
    path = lasso_path(design, n_lambdas=8, target_support=50)
    assert not path.target_reached
    assert any("50" in w for w in path.warnings)


def test_path_validation(rng):
    design = single_drug_design()
    with pytest.raises(ValueError):
        lasso_path(design, n_lambdas=1, target_support=1)
    with pytest.raises(ValueError):
        lasso_path(design, n_lambdas=5, target_support=0)


def test_solution_support_size_counts_nonzeros():
    design = single_drug_design()
    solution = fit_lasso(LassoProblem(design, lam=2.0))
    assert solution.support_size == 1
    assert solution.converged
    assert solution.sweeps >= 1


def test_exact_objective_value_single_drug():
    # At lam=2 the optimum is beta=-8: residual (1,1,-1,-1), objective
    # 0.5*4 + 2*8 = 18.
    design = single_drug_design()
    solution = fit_lasso(LassoProblem(design, lam=2.0))
    assert solution.objective == pytest.approx(18.0, abs=1e-12)
