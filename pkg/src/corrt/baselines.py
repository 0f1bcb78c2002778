"""Debiased-Lasso Wald baseline.

Lasso by cyclic coordinate descent, a debiasing step with a supplied
precision matrix (identity by default), and the studentized Wald
decision. The noise scale and precision matrix are inputs rather than
estimates: the baseline is a quasi-oracle comparator for simulations,
not an honest procedure for real data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DataError
from .stats import normal_cdf, normal_quantile

__all__ = [
    "DebiasedEstimate",
    "LassoFit",
    "debiased_lasso",
    "debiased_wald_test",
    "default_penalty",
    "lasso",
]

MAX_SWEEPS = 10_000
COEF_TOL = 1e-8


@dataclass(frozen=True)
class LassoFit:
    """Coordinate-descent solution of the l1-penalized least squares.

    kkt_violation is the worst stationarity defect at the returned
    point: the excess of |n^-1 w_j'r| over lam on inactive coordinates
    and the distance of n^-1 w_j'r from lam*sign(coef_j) on active ones.
    objective_history holds the value of the penalized objective after
    each completed sweep; it is non-increasing.
    """

    coef: np.ndarray
    lam: float
    iterations: int
    kkt_violation: float
    objective_history: tuple[float, ...]


@dataclass(frozen=True)
class DebiasedEstimate:
    """One-step debiased coefficient vector with per-coordinate scale.

    se[j] = noise_scale * sqrt((P S P')_jj / n) where S is the sample
    second-moment matrix of the design and P the supplied precision.
    """

    point: np.ndarray
    precision_used: str
    se: np.ndarray


def default_penalty(n: int, m: int) -> float:
    """Penalty level 16*sqrt(log(m - 1)/n) for an n x m design."""
    if m < 3:
        raise DataError("penalty rule needs at least three design columns")
    return 16.0 * float(np.sqrt(np.log(m - 1) / n))


def _validate_pair(Y, W):
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise DataError("design must be a 2-D array")
    if Y.shape != (W.shape[0],):
        raise DataError("response length must match the design row count")
    if not (np.isfinite(Y).all() and np.isfinite(W).all()):
        raise DataError("response and design must be finite")
    return Y, W


def lasso(Y, W, lam: float) -> LassoFit:
    """Minimize (1/2n)||Y - W pi||^2 + lam*||pi||_1 by coordinate descent.

    Cyclic sweeps with an incrementally maintained residual. Converges
    when the largest coefficient change in a sweep falls below 1e-8;
    raises ConvergenceError (carrying the KKT defect) at 10 000 sweeps.
    """
    Y, W = _validate_pair(Y, W)
    if not lam > 0:
        raise DataError("penalty must be positive")
    n, m = W.shape
    col_ssq = (W * W).sum(axis=0) / n
    active_cols = [j for j in range(m) if col_ssq[j] > 0]
    cols = [np.ascontiguousarray(W[:, j]) for j in range(m)]

    coef = np.zeros(m)
    r = Y.copy()
    history = []
    converged = False
    sweeps = 0
    for sweeps in range(1, MAX_SWEEPS + 1):
        max_delta = 0.0
        for j in active_cols:
            wj = cols[j]
            z = (wj @ r) / n + col_ssq[j] * coef[j]
            new = np.sign(z) * max(abs(z) - lam, 0.0) / col_ssq[j]
            delta = new - coef[j]
            if delta != 0.0:
                r -= delta * wj
                coef[j] = new
                max_delta = max(max_delta, abs(delta))
        history.append(0.5 * float(r @ r) / n + lam * float(np.abs(coef).sum()))
        if max_delta < COEF_TOL:
            converged = True
            break

    r = Y - W @ coef
    grad = W.T @ r / n
    inactive = coef == 0.0
    defect = 0.0
    if inactive.any():
        defect = max(defect, float((np.abs(grad[inactive]) - lam).max()))
    if (~inactive).any():
        active_gap = np.abs(grad[~inactive] - lam * np.sign(coef[~inactive]))
        defect = max(defect, float(active_gap.max()))
    defect = max(defect, 0.0)
    if not converged:
        raise ConvergenceError(
            f"coordinate descent hit {MAX_SWEEPS} sweeps "
            f"(kkt violation {defect:.3e})",
            kkt_violation=defect,
        )
    return LassoFit(
        coef=coef,
        lam=float(lam),
        iterations=sweeps,
        kkt_violation=defect,
        objective_history=tuple(history),
    )


def _studentizers(W, precision):
    """Per-coordinate quantities (P S P')_jj for the supplied precision."""
    n = W.shape[0]
    S = W.T @ W / n
    if precision is None:
        diag = np.diag(S).copy()
        used = "identity"
    else:
        P = np.asarray(precision, dtype=float)
        if P.shape != S.shape:
            raise DataError("precision matrix shape must match the design width")
        diag = ((P @ S) * P).sum(axis=1)
        used = "matrix"
    if (diag <= 0).any():
        raise DataError("singular studentization: a design column has no scale")
    return diag, used


def debiased_lasso(Y, W, fit: LassoFit, precision=None, noise_scale: float = 1.0):
    """One-step correction point = coef + P W'(Y - W coef)/n."""
    Y, W = _validate_pair(Y, W)
    if not noise_scale > 0:
        raise DataError("noise scale must be positive")
    n = W.shape[0]
    diag, used = _studentizers(W, precision)
    correction = W.T @ (Y - W @ fit.coef) / n
    if precision is None:
        point = fit.coef + correction
    else:
        point = fit.coef + np.asarray(precision, dtype=float) @ correction
    se = noise_scale * np.sqrt(diag / n)
    return DebiasedEstimate(point=point, precision_used=used, se=se)


def debiased_wald_test(
    Y,
    W,
    tested_index: int,
    beta0: float,
    alpha: float,
    precision=None,
    noise_scale: float = 1.0,
    lam: float | None = None,
):
    """Studentized Wald decision for one coordinate of the debiased fit.

    Rejects when sqrt(n)|point_j - beta0| / (noise_scale * sqrt((PSP')_jj))
    exceeds the two-sided normal critical value. Returns a TestReport with
    no adaptive-fit metadata.
    """
    from .inference import TestReport

    Y, W = _validate_pair(Y, W)
    n, m = W.shape
    if not 0 <= tested_index < m:
        raise DataError("tested_index out of range")
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie in (0, 1)")
    if lam is None:
        lam = default_penalty(n, m)
    fit = lasso(Y, W, lam)
    est = debiased_lasso(Y, W, fit, precision=precision, noise_scale=noise_scale)
    j = tested_index
    denominator = float(est.se[j] * np.sqrt(n))
    t = float(np.sqrt(n) * (est.point[j] - beta0) / denominator)
    critical = normal_quantile(1.0 - alpha / 2.0)
    p_value = 2.0 * (1.0 - normal_cdf(abs(t)))
    return TestReport(
        beta0=float(beta0),
        t_stat=t,
        critical_value=critical,
        p_value=p_value,
        reject=abs(t) > critical,
        denominator=denominator,
        gamma_fit_meta=None,
        theta_fit_meta=None,
    )
