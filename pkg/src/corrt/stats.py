"""Scalar normal-distribution functions, closed-form size/power formulas,
and the random generation primitives used by the simulation harness.

Everything here is deterministic given its inputs. Random draws go through
:class:`RngStream`, a frozen (seed, stream_id) token mapped onto a
counter-based Philox generator, so replications can be farmed out to
processes without any serial jump-ahead state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "RngStream",
    "ToeplitzSpec",
    "normal_cdf",
    "normal_quantile",
    "wald_size_distortion",
    "corrt_local_power",
    "draw_design",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    """Standard normal CDF.

    Parameters
    ----------
    x : float
        Evaluation point. Must be finite.

    Returns
    -------
    float
        P(N(0,1) <= x), accurate to about 1e-15 relative via ``erfc``.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"normal_cdf requires a finite argument, got {x!r}")
    return 0.5 * math.erfc(-x / _SQRT2)


def _normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


# Rational-approximation coefficients for the quantile initializer
# (central region plus two tail regions, switching at 0.02425).
_Q_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_Q_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_Q_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_Q_D = (
    7.784695709041462e-03, 3.224671290700398e-01,
    2.445134137142996e00, 3.754408661907416e00,
)
_Q_SPLIT = 0.02425


def _quantile_initial(u: float) -> float:
    if u < _Q_SPLIT:
        q = math.sqrt(-2.0 * math.log(u))
        num = ((((_Q_C[0] * q + _Q_C[1]) * q + _Q_C[2]) * q + _Q_C[3]) * q + _Q_C[4]) * q + _Q_C[5]
        den = (((_Q_D[0] * q + _Q_D[1]) * q + _Q_D[2]) * q + _Q_D[3]) * q + 1.0
        return num / den
    if u > 1.0 - _Q_SPLIT:
        q = math.sqrt(-2.0 * math.log(1.0 - u))
        num = ((((_Q_C[0] * q + _Q_C[1]) * q + _Q_C[2]) * q + _Q_C[3]) * q + _Q_C[4]) * q + _Q_C[5]
        den = (((_Q_D[0] * q + _Q_D[1]) * q + _Q_D[2]) * q + _Q_D[3]) * q + 1.0
        return -num / den
    q = u - 0.5
    r = q * q
    num = (((((_Q_A[0] * r + _Q_A[1]) * r + _Q_A[2]) * r + _Q_A[3]) * r + _Q_A[4]) * r + _Q_A[5]) * q
    den = ((((_Q_B[0] * r + _Q_B[1]) * r + _Q_B[2]) * r + _Q_B[3]) * r + _Q_B[4]) * r + 1.0
    return num / den


def normal_quantile(u: float) -> float:
    """Inverse of :func:`normal_cdf` on (0, 1).

    A rational approximation supplies the starting point and a single
    Newton step against the erfc-based CDF polishes it, which is enough
    for ``|normal_cdf(normal_quantile(u)) - u| <= 1e-9`` across
    u in [1e-12, 1 - 1e-12].

    Parameters
    ----------
    u : float
        Probability strictly between 0 and 1.

    Returns
    -------
    float
        The u-quantile of the standard normal distribution.
    """
    u = float(u)
    if not (0.0 < u < 1.0):
        raise ValueError(f"normal_quantile requires 0 < u < 1, got {u!r}")
    x = _quantile_initial(u)
    pdf = _normal_pdf(x)
    if pdf > 0.0:
        x -= (normal_cdf(x) - u) / pdf
    return x


def wald_size_distortion(alpha: float, a: float) -> float:
    """Asymptotic rejection rate of the debiased Wald test under a dense null.

    Evaluates ``2 - 2 * Phi(Phi^-1(1 - alpha/2) / sqrt(1 + a^2))`` where
    ``a`` is the dense-signal amplitude. Equals ``alpha`` exactly when
    ``a = 0`` and grows toward 1 with ``|a|``.
    """
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    a = float(a)
    if not math.isfinite(a):
        raise ValueError(f"a must be finite, got {a!r}")
    if a == 0.0:
        # The identity F(alpha, 0) = alpha is exact; skip the quantile
        # round trip, which wobbles in the last few bits.
        return alpha
    z = normal_quantile(1.0 - alpha / 2.0)
    return 2.0 - 2.0 * normal_cdf(z / math.sqrt(1.0 + a * a))


def corrt_local_power(h: float, kappa: float, alpha: float) -> float:
    """Asymptotic power of the correlation test against a local alternative.

    Returns ``Phi(-z + h*kappa) + Phi(-z - h*kappa)`` with
    ``z = Phi^-1(1 - alpha/2)``. Symmetric in the sign of ``h`` and
    nondecreasing in ``|h|``; collapses to ``alpha`` at ``h = 0``.
    """
    h = float(h)
    kappa = float(kappa)
    if not (math.isfinite(h) and math.isfinite(kappa)):
        raise ValueError("h and kappa must be finite")
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    z = normal_quantile(1.0 - alpha / 2.0)
    return normal_cdf(-z + h * kappa) + normal_cdf(-z - h * kappa)


@dataclass(frozen=True)
class RngStream:
    """Immutable token naming one reproducible random stream.

    Distinct ``stream_id`` values under the same seed give statistically
    independent streams (distinct Philox keys), which is how the Monte
    Carlo engine assigns one stream per replication.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if not (0 <= int(value) < 2**64):
                raise ValueError(f"{name} must fit in an unsigned 64-bit int, got {value!r}")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ToeplitzSpec:
    """Covariance specification with entries rho^|i-j|.

    Symmetric positive definite for any |rho| < 1, which keeps the
    Cholesky factorization below well defined.
    """

    dim: int
    rho: float

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        rho = float(self.rho)
        if not (-1.0 < rho < 1.0):
            raise ValueError(f"rho must lie strictly inside (-1, 1), got {rho!r}")

    def matrix(self) -> np.ndarray:
        idx = np.arange(self.dim)
        return float(self.rho) ** np.abs(idx[:, None] - idx[None, :])

    def cholesky(self) -> np.ndarray:
        return _toeplitz_cholesky(int(self.dim), float(self.rho))


@lru_cache(maxsize=32)
def _toeplitz_cholesky(dim: int, rho: float) -> np.ndarray:
    idx = np.arange(dim)
    sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(sigma)


def _student_t3(g: np.random.Generator, shape) -> np.ndarray:
    # Ratio construction: N(0,1) / sqrt(chi2_3 / 3). Raw t3, variance 3.
    z = g.standard_normal(shape)
    chi = g.chisquare(3.0, shape)
    return z / np.sqrt(chi / 3.0)


def draw_design(n: int, spec: ToeplitzSpec, tail: str, rng) -> np.ndarray:
    """Draw an n x p design with i.i.d. rows under the given covariance.

    Parameters
    ----------
    n : int
        Number of rows.
    spec : ToeplitzSpec
        Column covariance rho^|i-j| of dimension p.
    tail : {"gaussian", "student_t3"}
        Row distribution: correlated standard normals, or a Cholesky
        factor applied to i.i.d. raw t3 entries (variance 3 per entry,
        deliberately not standardized).
    rng : RngStream or numpy.random.Generator
        Stream token (equal tokens yield bitwise-equal matrices), or an
        already positioned generator when the caller needs to continue
        drawing from the same sequence afterwards.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n!r}")
    g = rng.generator() if isinstance(rng, RngStream) else rng
    if tail == "gaussian":
        raw = g.standard_normal((n, spec.dim))
    elif tail == "student_t3":
        raw = _student_t3(g, (n, spec.dim))
    else:
        raise ValueError(f"tail must be 'gaussian' or 'student_t3', got {tail!r}")
    if spec.rho == 0.0:
        return raw
    return raw @ spec.cholesky().T
