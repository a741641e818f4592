"""Single-breakpoint segmented regression on a rank-ordered sequence.

Given values v_1..v_K observed against their ranks r = 1..K, fit

    v_r ~ a + b * r + c * max(r - psi, 0)

for a continuous break location ``psi``.  The break is found by iterative
linearization: at the current guess the hinge term is expanded to first
order in psi, the resulting linear model is solved by least squares, and
the coefficient ratio of the two auxiliary regressors gives the update.
This converges in a handful of iterations on anything with an actual kink.

Used twice: per drug on the sorted gaps between consecutive prescriptions,
and once more on the per-drug break values to split drugs into regimes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# psi is kept strictly inside (1, K) so both slopes stay identifiable.
_EDGE = 1e-6
_MIN_POINTS = 4


@dataclass(frozen=True)
class ChangePointFit:
    """Fitted break location and diagnostics.

    ``psi`` is on the continuous rank axis (1-based); ``value_at_psi``
    interpolates the input sequence at that location.  Both are None when
    the fit is degenerate (too few points, a flat sequence, or a vanishing
    hinge coefficient).  ``converged`` is False either for a degenerate fit
    or when the step size never fell below tolerance within the iteration
    cap; in the latter case ``psi`` still holds the final iterate.
    """

    psi: float | None
    value_at_psi: float | None
    sse: float
    iterations: int
    converged: bool


def _piecewise_sse(values: np.ndarray, ranks: np.ndarray, psi: float) -> float:
    design = np.column_stack(
        [np.ones_like(ranks), ranks, np.maximum(ranks - psi, 0.0)]
    )
    coef, _, _, _ = np.linalg.lstsq(design, values, rcond=None)
    return float(np.sum((values - design @ coef) ** 2))


def piecewise_coefficients(values, psi: float) -> tuple[float, float, float]:
    """Least-squares (intercept, slope, hinge slope) at a fixed break."""
    v = np.asarray(values, dtype=np.float64)
    ranks = np.arange(1, v.shape[0] + 1, dtype=np.float64)
    design = np.column_stack([np.ones_like(ranks), ranks, np.maximum(ranks - psi, 0.0)])
    coef, _, _, _ = np.linalg.lstsq(design, v, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def interpolate_at(values: np.ndarray, psi: float) -> float:
    """Linearly interpolate the 1-based sequence ``values`` at rank ``psi``."""
    k = values.shape[0]
    psi = min(max(psi, 1.0), float(k))
    lo = int(np.floor(psi))
    hi = min(lo + 1, k)
    frac = psi - lo
    return float(values[lo - 1] * (1.0 - frac) + values[hi - 1] * frac)


def fit_changepoint(
    values,
    *,
    psi0: float | None = None,
    max_iter: int = 100,
    rel_tol: float = 1e-4,
) -> ChangePointFit:
    """Fit one break to ``values`` against ranks 1..K.

    The starting point defaults to 0.9 * K, near the top of the sequence,
    because the typical input is a sorted gap sequence whose tail holds the
    regime change.  Iteration stops when the step falls below
    ``rel_tol * K`` and is declared non-converged past ``max_iter``.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-d sequence of values")
    k = v.shape[0]
    if k < _MIN_POINTS or np.ptp(v) == 0.0:
        sse = float(np.sum((v - v.mean()) ** 2)) if k else 0.0
        return ChangePointFit(None, None, sse, 0, False)

    ranks = np.arange(1, k + 1, dtype=np.float64)
    scale = max(1.0, float(np.ptp(v)))
    psi = float(psi0) if psi0 is not None else 0.9 * k
    psi = min(max(psi, 1.0 + _EDGE), k - _EDGE)

    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        above = ranks > psi
        u = np.where(above, ranks - psi, 0.0)
        w = np.where(above, -1.0, 0.0)
        design = np.column_stack([np.ones(k), ranks, u, w])
        coef, _, _, _ = np.linalg.lstsq(design, v, rcond=None)
        c_hinge, c_shift = coef[2], coef[3]
        if abs(c_hinge) < 1e-12 * scale:
            return ChangePointFit(None, None, _piecewise_sse(v, ranks, psi), iterations, False)
        step = c_shift / c_hinge
        psi = min(max(psi + step, 1.0 + _EDGE), k - _EDGE)
        if abs(step) < rel_tol * k:
            converged = True
            break

    # Hitting the iteration cap is a stop, not a failure: the final iterate
    # is still a usable break location, flagged via converged=False.
    sse = _piecewise_sse(v, ranks, psi)
    return ChangePointFit(
        psi=float(psi),
        value_at_psi=interpolate_at(v, psi),
        sse=sse,
        iterations=iterations,
        converged=converged,
    )
