"""L1-penalized least squares on sparse designs.

Solves  argmin_b  0.5 * ||y - X b||^2 + lam * ||b||_1  by cyclic
coordinate descent with an active-set strategy: full sweeps over all
columns alternate with cheap sweeps over the current support, and the
solution is accepted only when a full sweep moves no coefficient
meaningfully and the stationarity conditions hold to ``tolerance``:

* every nonzero coefficient m satisfies |x_m . r - lam * sign(b_m)| <=
  tolerance, and
* every zero coefficient satisfies |x_m . r| <= lam + tolerance,

with r the residual y - X b.  The objective carries no 1/n factor, so
``lam`` is on the scale of ||X^T y||.

The path runner solves a descending log-spaced grid of penalties with
warm starts and picks the grid point whose support size is closest to a
target, preferring the sparser (larger-penalty) end on ties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .design import DesignMatrix

logger = logging.getLogger("drugshift.lasso")

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_SWEEPS = 10_000
DEFAULT_N_LAMBDAS = 100
DEFAULT_TARGET_SUPPORT = 200
DEFAULT_LAMBDA_MIN_RATIO = 1e-3


def soft_threshold(z: float, t: float) -> float:
    """Shrink ``z`` toward zero by ``t``, clipping through zero."""
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@dataclass(frozen=True)
class LassoProblem:
    """One penalized fit: a design, a penalty, and stopping control."""

    design: DesignMatrix
    lam: float
    tolerance: float = DEFAULT_TOLERANCE
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"penalty must be nonnegative, got {self.lam}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max sweeps must be at least 1")


@dataclass(frozen=True)
class LassoSolution:
    """Fitted coefficients with optimality diagnostics."""

    beta: np.ndarray
    objective: float
    kkt_violation: float
    sweeps: int
    converged: bool

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.beta))


class _Columns:
    """CSC views of the design for fast per-coordinate access."""

    def __init__(self, X: sparse.spmatrix):
        csc = X.tocsc()
        self.indptr = csc.indptr
        self.indices = csc.indices
        self.data = csc.data
        self.n = csc.shape[1]
        self.sq = np.asarray(csc.multiply(csc).sum(axis=0), dtype=np.float64).ravel()
        self.csc = csc

    def column(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[m], self.indptr[m + 1]
        return self.indices[lo:hi], self.data[lo:hi]


def _sweep(
    cols: _Columns, order: np.ndarray, beta: np.ndarray, r: np.ndarray, lam: float
) -> float:
    """One pass of coordinate updates over ``order``; returns max |change|."""
    biggest = 0.0
    for m in order:
        s = cols.sq[m]
        if s == 0.0:
            continue
        idx, val = cols.column(m)
        old = beta[m]
        z = float(val @ r[idx]) + s * old
        new = soft_threshold(z, lam) / s
        if new != old:
            r[idx] -= (new - old) * val
            beta[m] = new
            change = abs(new - old)
            if change > biggest:
                biggest = change
    return biggest


def kkt_violation(design: DesignMatrix, beta: np.ndarray, lam: float) -> float:
    """Worst stationarity violation of ``beta`` for the given penalty."""
    r = design.y - design.X @ beta
    grad = design.X.T @ r
    active = beta != 0
    worst = 0.0
    if active.any():
        worst = float(np.max(np.abs(grad[active] - lam * np.sign(beta[active]))))
    if (~active).any():
        slack = np.abs(grad[~active]) - lam
        worst = max(worst, float(max(0.0, slack.max())))
    return worst


def fit_lasso(
    problem: LassoProblem, warm_start: np.ndarray | None = None
) -> LassoSolution:
    """Solve one penalized problem to the stated tolerance.

    Returns the best iterate with ``converged=False`` when the sweep
    budget runs out or the iteration reaches a floating-point fixed
    point that still violates stationarity.
    """
    design = problem.design
    if design.X.nnz == 0:
        raise ValueError("design has no nonzero exposure column to fit")

    cols = _Columns(design.X)
    n_cols = cols.n
    if warm_start is not None:
        beta = np.array(warm_start, dtype=np.float64).copy()
        if beta.shape != (n_cols,):
            raise ValueError("warm start has the wrong number of coefficients")
        r = design.y - design.X @ beta
    else:
        beta = np.zeros(n_cols, dtype=np.float64)
        r = design.y.astype(np.float64).copy()

    all_cols = np.arange(n_cols)
    lam = float(problem.lam)
    tol = problem.tolerance
    sweeps = 0
    converged = False

    while sweeps < problem.max_sweeps:
        delta = _sweep(cols, all_cols, beta, r, lam)
        sweeps += 1
        scale = max(1.0, float(np.max(np.abs(beta))) if n_cols else 1.0)
        if delta <= tol * scale:
            kkt = kkt_violation(design, beta, lam)
            if kkt <= tol:
                converged = True
                break
            if delta == 0.0:
                # Exact fixed point in floating point; further sweeps
                # cannot move, so report the violation honestly.
                break
        else:
            active = np.flatnonzero(beta)
            while active.size and sweeps < problem.max_sweeps:
                d = _sweep(cols, active, beta, r, lam)
                sweeps += 1
                if d <= tol * max(1.0, float(np.max(np.abs(beta)))):
                    break

    # Recompute the residual once to shed accumulated drift.
    r = design.y - design.X @ beta
    objective = 0.5 * float(r @ r) + lam * float(np.sum(np.abs(beta)))
    kkt = kkt_violation(design, beta, lam)
    if converged and kkt > tol:
        converged = False
    return LassoSolution(
        beta=beta,
        objective=objective,
        kkt_violation=kkt,
        sweeps=sweeps,
        converged=converged,
    )


@dataclass(frozen=True)
class PathResult:
    """A solved penalty grid plus the support-targeted selection."""

    lambdas: np.ndarray  # descending
    solutions: tuple[LassoSolution, ...]
    support_sizes: np.ndarray
    target_support: int
    selected_index: int
    target_reached: bool
    warnings: tuple[str, ...] = ()

    @property
    def selected_lambda(self) -> float:
        return float(self.lambdas[self.selected_index])

    @property
    def selected_solution(self) -> LassoSolution:
        return self.solutions[self.selected_index]


def lambda_max(design: DesignMatrix) -> float:
    """Smallest penalty at which the all-zero solution is optimal."""
    return float(np.max(np.abs(design.X.T @ design.y)))


def lasso_path(
    design: DesignMatrix,
    *,
    n_lambdas: int = DEFAULT_N_LAMBDAS,
    target_support: int = DEFAULT_TARGET_SUPPORT,
    lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO,
    tolerance: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> PathResult:
    """Solve a descending penalty grid and pick a support size.

    The grid is log-spaced from the smallest penalty that zeroes every
    coefficient down to ``lambda_min_ratio`` times it.  Each solve warm
    starts from the previous one.  The selected grid point minimizes
    |support - target|; on ties the larger penalty wins.  When the
    target is not hit exactly, the closest support is selected and a
    warning recorded.
    """
    if n_lambdas < 2:
        raise ValueError("need at least two penalty grid points")
    if target_support < 1:
        raise ValueError("target support must be at least 1")
    lam_hi = lambda_max(design)
    if lam_hi == 0.0:
        raise ValueError("response is orthogonal to every exposure column")

    lambdas = np.geomspace(lam_hi, lam_hi * lambda_min_ratio, num=n_lambdas)
    solutions: list[LassoSolution] = []
    beta = None
    for lam in lambdas:
        sol = fit_lasso(
            LassoProblem(design, float(lam), tolerance=tolerance, max_sweeps=max_sweeps),
            warm_start=beta,
        )
        solutions.append(sol)
        beta = sol.beta

    supports = np.array([s.support_size for s in solutions], dtype=np.int64)
    for i in range(1, len(supports)):
        if supports[i] < supports[i - 1]:
            logger.info(
                "support shrank from %d to %d as the penalty dropped "
                "from %.6g to %.6g",
                supports[i - 1],
                supports[i],
                lambdas[i - 1],
                lambdas[i],
            )

    selected = int(np.argmin(np.abs(supports - target_support)))
    reached = bool(supports[selected] == target_support)
    warnings: list[str] = []
    if not reached:
        warnings.append(
            f"no grid point has exactly {target_support} nonzero coefficients; "
            f"selected the closest ({int(supports[selected])}) at penalty "
            f"{float(lambdas[selected]):.6g}"
        )
    if not all(s.converged for s in solutions):
        bad = int(np.sum([not s.converged for s in solutions]))
        warnings.append(f"{bad} of {len(solutions)} path fits did not converge")

    return PathResult(
        lambdas=lambdas,
        solutions=tuple(solutions),
        support_sizes=supports,
        target_support=target_support,
        selected_index=selected,
        target_reached=reached,
        warnings=tuple(warnings),
    )
