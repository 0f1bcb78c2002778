"""The self-normalized correlation statistic, its test, and the
confidence interval obtained by inverting that test over a grid.

The statistic divides the inner product of the two residual vectors by
the root of the sum of squared entrywise products, so it is free of
both residual scales and robust to heteroscedasticity. The null is
rejected on a two-sided normal comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateStatisticError
from .estimators import AdaptiveFit, fit_gamma, fit_theta
from .programs import Dataset
from .stats import normal_cdf, normal_quantile

__all__ = [
    "ConfidenceSet",
    "FitMeta",
    "TestReport",
    "confidence_interval",
    "statistic",
    "test",
]

# Relative floor under the squared denominator; anything below it is an
# exact-cancellation pathology rather than a small but valid value.
DEGENERACY_FLOOR = 1e-24

AUTO_GRID_POINTS = 201
AUTO_HALF_WIDTH_SES = 10.0
AUTO_MAX_DOUBLINGS = 3


@dataclass(frozen=True)
class FitMeta:
    """Tuning diagnostics of one adaptive fit, kept on the report."""

    a_hat: float
    used_fallback: bool
    feasibility_margins: tuple[float, float, float]


@dataclass(frozen=True)
class TestReport:
    """Decision record for one tested coefficient value."""

    beta0: float
    t_stat: float
    critical_value: float
    p_value: float
    reject: bool
    denominator: float
    gamma_fit_meta: FitMeta | None
    theta_fit_meta: FitMeta | None


@dataclass(frozen=True)
class ConfidenceSet:
    """Grid inversion of the test at one confidence level.

    hull spans the smallest and largest accepted grid values, or is
    None when every point is rejected (diagnostic says so). contiguous
    reports whether the accepted points form a single run; a false
    value means the raw mask matters and the hull alone overstates
    the set.
    """

    level: float
    grid: np.ndarray
    accepted: np.ndarray
    hull: tuple[float, float] | None
    contiguous: bool
    diagnostic: str | None


def _statistic_parts(eps_hat, u_hat) -> tuple[float, float]:
    eps = np.asarray(eps_hat, dtype=float)
    u = np.asarray(u_hat, dtype=float)
    if eps.ndim != 1 or u.ndim != 1 or eps.shape != u.shape:
        raise DataError("residual vectors must be 1-D and the same length")
    if eps.size == 0:
        raise DataError("residual vectors must be nonempty")
    if not (np.isfinite(eps).all() and np.isfinite(u).all()):
        raise DataError("residual vectors must be finite")
    n = eps.size
    prod = eps * u
    den_sq = float(prod @ prod)
    scale4 = float((eps @ eps) / n) * float((u @ u) / n)
    if den_sq <= DEGENERACY_FLOOR * n * scale4:
        raise DegenerateStatisticError(
            "self-normalized denominator vanished; residual products "
            "cancel exactly and the test is undefined"
        )
    den = float(np.sqrt(den_sq))
    return float(prod.sum()) / den, den


def statistic(eps_hat, u_hat) -> float:
    """Self-normalized correlation of two residual vectors."""
    return _statistic_parts(eps_hat, u_hat)[0]


def _meta(fit: AdaptiveFit) -> FitMeta:
    return FitMeta(
        a_hat=fit.a_hat,
        used_fallback=fit.used_fallback,
        feasibility_margins=fit.feasibility_margins,
    )


def _report(beta0, alpha, gamma_fit, theta_fit) -> TestReport:
    t, den = _statistic_parts(gamma_fit.residuals, theta_fit.residuals)
    critical = normal_quantile(1.0 - alpha / 2.0)
    return TestReport(
        beta0=float(beta0),
        t_stat=t,
        critical_value=critical,
        p_value=2.0 * (1.0 - normal_cdf(abs(t))),
        reject=abs(t) > critical,
        denominator=den,
        gamma_fit_meta=_meta(gamma_fit),
        theta_fit_meta=_meta(theta_fit),
    )


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DataError("significance level must lie strictly in (0, 1)")


def test(data: Dataset, beta0: float, alpha: float = 0.05) -> TestReport:
    """Two-sided test of the hypothesis that the coefficient is beta0."""
    _check_alpha(alpha)
    theta_fit = fit_theta(data)
    return _report(beta0, alpha, fit_gamma(data, beta0), theta_fit)


def _accepted_mask(data, grid, alpha, theta_fit):
    accepted = np.zeros(grid.size, dtype=bool)
    for k, b in enumerate(grid):
        report = _report(b, alpha, fit_gamma(data, float(b)), theta_fit)
        accepted[k] = not report.reject
    return accepted


def _auto_center(data: Dataset) -> tuple[float, float]:
    """Debiased-baseline point estimate and standard error for the
    tested coordinate, with identity precision and the plug-in noise
    scale from the Lasso residuals (inflated to the raw response scale
    when the fit is empty, which only widens the searched window)."""
    from .baselines import debiased_lasso, default_penalty, lasso

    W, y = data.W, data.y
    n, m = W.shape
    fit = lasso(y, W, default_penalty(n, m))
    sigma = float(np.sqrt(((y - W @ fit.coef) ** 2).mean()))
    if sigma <= 0:
        sigma = 1.0
    est = debiased_lasso(y, W, fit, precision=None, noise_scale=sigma)
    return float(est.point[data.tested_index]), float(est.se[data.tested_index])


def confidence_interval(data: Dataset, level: float = 0.95, grid=None) -> ConfidenceSet:
    """Invert the test over a grid of candidate coefficient values.

    The theta-side fit does not depend on the candidate value, so it is
    computed once and shared by every grid point. With grid=None the
    grid is centered at the debiased-baseline estimate with half-width
    10 standard errors and 201 points, doubling the width (at most 3
    times) while an endpoint is still accepted.
    """
    _check_alpha(1.0 - level)
    alpha = 1.0 - level
    theta_fit = fit_theta(data)

    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise DataError("explicit grid must be a nonempty 1-D sequence")
        if not np.isfinite(grid).all():
            raise DataError("explicit grid must be finite")
        accepted = _accepted_mask(data, grid, alpha, theta_fit)
    else:
        center, se = _auto_center(data)
        half = AUTO_HALF_WIDTH_SES * se
        if half <= 0:
            half = 1.0
        for _ in range(AUTO_MAX_DOUBLINGS + 1):
            grid = np.linspace(center - half, center + half, AUTO_GRID_POINTS)
            accepted = _accepted_mask(data, grid, alpha, theta_fit)
            if not (accepted[0] or accepted[-1]):
                break
            half *= 2.0

    idx = np.flatnonzero(accepted)
    if idx.size == 0:
        return ConfidenceSet(
            level=float(level),
            grid=grid,
            accepted=accepted,
            hull=None,
            contiguous=True,
            diagnostic="no coverage on grid",
        )
    hull = (float(grid[idx[0]]), float(grid[idx[-1]]))
    contiguous = bool(idx.size == idx[-1] - idx[0] + 1)
    return ConfidenceSet(
        level=float(level),
        grid=grid,
        accepted=accepted,
        hull=hull,
        contiguous=contiguous,
        diagnostic=None,
    )
