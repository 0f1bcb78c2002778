"""Dataset container and LP encodings of the two residual programs.

The test statistic needs two constrained L1 regressions: the outcome
(shifted by the hypothesized coefficient) on the nuisance design, and
the tested regressor on the nuisance design. Both are linear programs
in the positive/negative parts of the coefficient vector, with one
scalar tuning parameter entering the right-hand side linearly. This
module builds those programs; solving and tuning live elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, DataError
from .simplex import ParametricLP
from .stats import normal_quantile

__all__ = [
    "Dataset",
    "RegressionProgram",
    "build_gamma_program",
    "build_theta_program",
    "extract_coefficients",
    "tuning_criterion",
]


@dataclass(frozen=True)
class Dataset:
    """Design matrix plus response, with one designated tested column.

    Parameters
    ----------
    W : ndarray, shape (n, m)
        Full regressor matrix. Column ``tested_index`` is the regressor
        whose coefficient is under test; the remaining m - 1 columns are
        nuisance.
    y : ndarray, shape (n,)
        Response vector.
    tested_index : int
        Zero-based column index of the tested regressor in ``W``.
    """

    W: np.ndarray
    y: np.ndarray
    tested_index: int = 0

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if W.ndim != 2:
            raise DataError("design matrix must be two-dimensional")
        n, m = W.shape
        if y.shape != (n,):
            raise DataError(
                f"response length {y.shape} does not match {n} design rows"
            )
        if n < 2 or m < 2:
            raise DataError("need at least two rows and two columns")
        if not np.isfinite(W).all():
            raise DataError("design matrix contains non-finite entries")
        if not np.isfinite(y).all():
            raise DataError("response contains non-finite entries")
        if not 0 <= self.tested_index < m:
            raise DataError(
                f"tested column {self.tested_index} outside [0, {m})"
            )
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        """Number of nuisance columns."""
        return self.W.shape[1] - 1

    @property
    def z(self) -> np.ndarray:
        """Tested regressor, shape (n,)."""
        return self.W[:, self.tested_index]

    @property
    def X(self) -> np.ndarray:
        """Nuisance design, shape (n, p)."""
        keep = [j for j in range(self.W.shape[1]) if j != self.tested_index]
        return self.W[:, keep]


@dataclass(frozen=True)
class RegressionProgram:
    """A built LP together with the pieces needed to interpret it.

    The LP variables are the stacked positive and negative parts
    (b_plus, b_minus) of the p-vector of regression coefficients, so the
    LP has 2p variables and the objective is the L1 norm. ``target`` is
    the vector being regressed on ``X``.
    """

    lp: ParametricLP
    X: np.ndarray
    target: np.ndarray
    kind: str = field(default="gamma")

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _dual_norm_level(n: int, p: int) -> float:
    # 1.1 / sqrt(n) times the two-sided quantile at simultaneity level 1/(np).
    return 1.1 * normal_quantile(1.0 - 1.0 / (p * n)) / np.sqrt(n)


def _overfit_floor(n: int) -> float:
    return 0.01 / np.sqrt(np.log(n))


def _assemble(X: np.ndarray, v: np.ndarray, kind: str) -> RegressionProgram:
    n, p = X.shape
    if p < 1:
        raise ConstructionError("no nuisance columns to regress on")
    if n < 2:
        raise ConstructionError("need at least two observations")
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0.0:
        raise ConstructionError(f"{kind} target vector is identically zero")

    G = X.T @ X / n
    xv = X.T @ v / n
    eta = _dual_norm_level(n, p)
    rho = _overfit_floor(n)
    box = vnorm / np.log(n) ** 2

    # Rows: correlation band (2p), residual box (2n), overfit floor (1).
    A = np.zeros((2 * p + 2 * n + 1, 2 * p))
    A[:p, :p] = G
    A[:p, p:] = -G
    A[p:2 * p, :p] = -G
    A[p:2 * p, p:] = G
    A[2 * p:2 * p + n, :p] = X
    A[2 * p:2 * p + n, p:] = -X
    A[2 * p + n:2 * p + 2 * n, :p] = -X
    A[2 * p + n:2 * p + 2 * n, p:] = X
    A[-1, :p] = xv
    A[-1, p:] = -xv

    b0 = np.concatenate([
        xv,
        -xv,
        v + box,
        -v + box,
        [(1.0 - rho) * float(v @ v) / n],
    ])
    b1 = np.concatenate([
        np.full(2 * p, eta),
        np.zeros(2 * n),
        [0.0],
    ])
    lp = ParametricLP(c=np.ones(2 * p), A=A, b0=b0, b1=b1)
    return RegressionProgram(lp=lp, X=X, target=v, kind=kind)


def build_gamma_program(data: Dataset, beta0: float) -> RegressionProgram:
    """Program for regressing y - beta0 * z on the nuisance design."""
    if not np.isfinite(beta0):
        raise DataError("hypothesized coefficient must be finite")
    v = data.y - beta0 * data.z
    return _assemble(data.X, v, kind="gamma")


def build_theta_program(data: Dataset) -> RegressionProgram:
    """Program for regressing the tested column on the nuisance design.

    Does not depend on the hypothesized coefficient, so one fit can be
    reused across a grid of hypotheses.
    """
    return _assemble(data.X, data.z, kind="theta")


def extract_coefficients(program: RegressionProgram, x: np.ndarray) -> np.ndarray:
    """Recover the signed coefficient vector from LP variables.

    The split representation is not unique (adding a constant to both
    parts preserves the difference), so the common part is subtracted.
    """
    x = np.asarray(x, dtype=float)
    p = program.p
    if x.shape != (2 * p,):
        raise ConstructionError(
            f"expected {2 * p} LP variables, got {x.shape}"
        )
    return x[:p] - x[p:]


def tuning_criterion(X: np.ndarray, residuals: np.ndarray) -> float:
    """Largest column-wise root mean square of x_ij * r_i.

    The adaptive tuning rule brackets this quantity between half and
    three halves of the candidate parameter.
    """
    X = np.asarray(X, dtype=float)
    r = np.asarray(residuals, dtype=float)
    n = X.shape[0]
    if r.shape != (n,):
        raise ConstructionError("residual length does not match design rows")
    return float(np.sqrt(np.max(((X * r[:, None]) ** 2).sum(axis=0) / n)))
