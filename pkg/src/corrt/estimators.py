"""Adaptive tuning search and the final constrained L1 estimators.

The tuning parameter is admissible when the fitted residuals r satisfy
(3/2) a >= tuning_criterion(X, r) >= (1/2) a. The selected value is the
largest admissible one, found by a descending scan over a geometric grid
followed by bisection at the upper boundary. When no value is admissible
the estimator falls back to a fixed data-driven level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError
from .programs import (
    Dataset,
    RegressionProgram,
    build_gamma_program,
    build_theta_program,
    extract_coefficients,
    tuning_criterion,
)
from .simplex import DescendingPath, LPResult, solve_at

__all__ = [
    "AdaptiveFit",
    "Membership",
    "fallback_level",
    "fit_gamma",
    "fit_theta",
    "membership",
    "select_a_hat",
]

GRID_POINTS = 40
GRID_LO_FACTOR = 1e-3
GRID_HI_FACTOR = 4.0
REFINE_RTOL = 1e-4
_SLACK = 1e-9


@dataclass(frozen=True)
class Membership:
    """Outcome of testing one tuning value for admissibility."""

    in_S: bool
    reason: str | None = None
    criterion: float | None = None


@dataclass(frozen=True)
class AdaptiveFit:
    """A fitted coefficient vector with its tuning diagnostics.

    feasibility_margins holds the worst slack in each of the three
    constraint families (correlation band, residual box, overfit floor);
    all three are nonnegative up to solver tolerance.
    """

    coef: np.ndarray
    a_hat: float
    used_fallback: bool
    residuals: np.ndarray
    criterion_at_a: float
    feasibility_margins: tuple[float, float, float]


def fallback_level(program: RegressionProgram) -> float:
    """Tuning value used when no admissible one exists."""
    X, v = program.X, program.target
    n = X.shape[0]
    return 2.0 * float(np.abs(X).max()) * float(np.linalg.norm(v)) / np.sqrt(n)


def _admissible(a: float, criterion: float) -> bool:
    return 0.5 * a - _SLACK <= criterion <= 1.5 * a + _SLACK


def _classify(program: RegressionProgram, result: LPResult, a: float) -> Membership:
    if result.status != "optimal":
        return Membership(in_S=False, reason="lp_infeasible")
    coef = extract_coefficients(program, result.x)
    crit = tuning_criterion(program.X, program.target - program.X @ coef)
    if _admissible(a, crit):
        return Membership(in_S=True, criterion=crit)
    reason = "criterion_too_large" if crit > 1.5 * a else "criterion_too_small"
    return Membership(in_S=False, reason=reason, criterion=crit)


def membership(program: RegressionProgram, a: float) -> Membership:
    """Check one tuning value with a fresh solve."""
    if a < 0:
        raise ValueError("tuning value must be nonnegative")
    return _classify(program, solve_at(program.lp, a), a)


def _search(program: RegressionProgram):
    """Largest admissible tuning value along the path, or None.

    Returns (a_hat or None, path or None). The search window is anchored
    at the criterion of the zero fit, which bounds every attainable
    criterion value up to constants. The path is consumed lazily from the
    top because the selected value is the largest admissible one; the
    program has b1 >= 0, so an infeasible window top certifies an empty
    admissible set.
    """
    c0 = tuning_criterion(program.X, program.target)
    if c0 <= 0.0:
        return None, None
    a_lo, a_hi = GRID_LO_FACTOR * c0, GRID_HI_FACTOR * c0
    path = DescendingPath(program.lp, a_hi, a_lo)
    if path.top_status != "optimal":
        return None, path

    def ok(a):
        return _classify(program, path.solution_at(a), a).in_S

    grid = np.geomspace(a_lo, a_hi, GRID_POINTS)
    best = None
    above = None
    for a in grid[::-1]:
        found = _classify(program, path.solution_at(float(a)), float(a))
        if found.in_S:
            best = float(a)
            break
        if found.reason == "lp_infeasible":
            break
        above = float(a)
    if best is None:
        return None, path
    if above is not None:
        lo, hi = best, above
        while hi - lo > REFINE_RTOL * lo:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        best = lo
    return best, path


def select_a_hat(program: RegressionProgram) -> tuple[float, bool]:
    """Largest admissible tuning value, or the fallback when none exists."""
    a_hat, _ = _search(program)
    if a_hat is None:
        return fallback_level(program), False
    return a_hat, True


def _family_margins(
    program: RegressionProgram, result: LPResult
) -> tuple[float, float, float]:
    n, p = program.X.shape
    s = result.slack_margins
    return (
        float(s[: 2 * p].min()),
        float(s[2 * p : 2 * p + 2 * n].min()),
        float(s[-1]),
    )


def _finalize(
    program: RegressionProgram, result: LPResult, a_hat: float, used_fallback: bool
) -> AdaptiveFit:
    coef = extract_coefficients(program, result.x)
    residuals = program.target - program.X @ coef
    return AdaptiveFit(
        coef=coef,
        a_hat=a_hat,
        used_fallback=used_fallback,
        residuals=residuals,
        criterion_at_a=tuning_criterion(program.X, residuals),
        feasibility_margins=_family_margins(program, result),
    )


def _fit(program: RegressionProgram) -> AdaptiveFit:
    a_hat, path = _search(program)
    if a_hat is not None:
        return _finalize(program, path.solution_at(a_hat), a_hat, False)
    a_fb = fallback_level(program)
    result = solve_at(program.lp, a_fb)
    if result.status != "optimal":
        raise EstimationError(
            f"{program.kind} program infeasible even at the fallback "
            f"tuning value {a_fb:.6g}"
        )
    return _finalize(program, result, a_fb, True)


def fit_gamma(data: Dataset, beta0: float) -> AdaptiveFit:
    """Constrained L1 fit of the shifted response on the nuisance design."""
    return _fit(build_gamma_program(data, beta0))


def fit_theta(data: Dataset) -> AdaptiveFit:
    """Constrained L1 fit of the tested column on the nuisance design.

    Independent of any hypothesized coefficient, so the result can be
    cached and shared across a confidence-interval inversion.
    """
    return _fit(build_theta_program(data))
