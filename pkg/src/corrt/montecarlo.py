"""Simulation harness: data-generating processes, the replication
engine, power curves, and CSV/JSON export.

Two DGP families are built in. The sparse family draws an n x p design
with Toeplitz column correlation and puts a fixed 2/sqrt(n) block on
coordinates 2..4 (1-based), filling the rest of the support uniformly;
the tested coefficient is the third column. The dense family is the
motivating orthogonal-design setup: an extra first column carries the
tested coefficient (zero under the null) and every nuisance coordinate
equals amplitude/sqrt(width).

Replication k always runs on the stream (master_seed, k), so results
are independent of execution order and of the parallelism degree, and
extending a run leaves earlier replications unchanged.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import debiased_wald_test, default_penalty
from .errors import CorrtError, DataError, HarnessError
from .estimators import fit_gamma, fit_theta
from .inference import _report
from .programs import Dataset
from .stats import RngStream, ToeplitzSpec, _student_t3, draw_design

__all__ = [
    "DgpSpec",
    "McResult",
    "RepRecord",
    "generate",
    "generate_with_truth",
    "power_curve",
    "run_mc",
    "to_csv",
    "to_json",
]

_DESIGNS = ("gaussian", "student_t3")
_ERRORS = ("gaussian", "student_t3")
FAILURE_BUDGET = 0.05

# 1-based coordinates 2..4 carry the fixed signal block; the tested
# coefficient is the 1-based third column.
_SPARSE_TESTED = 2


@dataclass(frozen=True)
class DgpSpec:
    """Immutable description of one simulated data-generating process.

    family "sparse": y = W pi + eps with W n x p Toeplitz(rho) rows and
    the block signal rule; s is the support size, truncated from the
    outside in below 3 so the tested coefficient stays nonzero. family
    "dense": identity-covariance Gaussian design, tested first column
    with true value 0, all p-1 nuisance coefficients equal to
    amplitude/sqrt(p-1). h shifts the tested truth by h/sqrt(n) off the
    null in both families.
    """

    family: str
    n: int
    p: int
    design: str = "gaussian"
    rho: float = 0.0
    error: str = "gaussian"
    s: int | None = None
    amplitude: float | None = None
    h: float = 0.0

    def __post_init__(self):
        if self.family not in ("sparse", "dense"):
            raise DataError("family must be 'sparse' or 'dense'")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            raise DataError("n must be an integer of at least 2")
        if not (isinstance(self.p, (int, np.integer)) and self.p >= 2):
            raise DataError("p must be an integer of at least 2")
        if self.design not in _DESIGNS:
            raise DataError(f"design must be one of {_DESIGNS}")
        if self.error not in _ERRORS:
            raise DataError(f"error must be one of {_ERRORS}")
        if not (-1.0 < float(self.rho) < 1.0):
            raise DataError("rho must lie strictly inside (-1, 1)")
        if not np.isfinite(self.h):
            raise DataError("h must be finite")
        if self.family == "sparse":
            if self.amplitude is not None:
                raise DataError("amplitude applies only to the dense family")
            if self.p < 3:
                raise DataError("sparse family needs p of at least 3")
            if not (
                isinstance(self.s, (int, np.integer)) and 1 <= self.s <= self.p
            ):
                raise DataError("s must be an integer in [1, p]")
        else:
            if self.s is not None:
                raise DataError("s applies only to the sparse family")
            if self.amplitude is None or not np.isfinite(self.amplitude):
                raise DataError("dense family needs a finite amplitude")
            if self.design != "gaussian" or self.rho != 0.0:
                raise DataError("dense family uses the identity-covariance "
                                "gaussian design")

    @property
    def tested_index(self) -> int:
        return _SPARSE_TESTED if self.family == "sparse" else 0

    @property
    def null_value(self) -> float:
        """Tested coefficient under the null hypothesis."""
        if self.family == "sparse":
            return 2.0 / float(np.sqrt(self.n))
        return 0.0

    @property
    def tested_coef_truth(self) -> float:
        return self.null_value + self.h / float(np.sqrt(self.n))


@dataclass(frozen=True)
class RepRecord:
    """Outcome of one replication; error is set when the rep failed."""

    stream_id: int
    t_stat: float | None
    reject: bool | None
    a_hat_gamma: float | None
    a_hat_theta: float | None
    fallback_gamma: bool | None
    fallback_theta: bool | None
    wall_time: float
    error: str | None = None


@dataclass(frozen=True)
class McResult:
    """Aggregated cell of a Monte Carlo table.

    rejection_rate divides by the requested replication count; failed
    replications (recorded with their message, never silently dropped)
    therefore pull the rate down and are capped at 5% by run_mc.
    """

    spec: DgpSpec
    method: str
    alpha: float
    reps: int
    rejections: int
    rejection_rate: float
    mc_stderr: float
    failures: int
    per_rep_records: tuple[RepRecord, ...]


def _draw_errors(spec: DgpSpec, g) -> np.ndarray:
    if spec.error == "gaussian":
        return g.standard_normal(spec.n)
    return _student_t3(g, spec.n)


def generate_with_truth(spec: DgpSpec, rng: RngStream):
    """Draw one dataset and return it with the true coefficient vector.

    Draw order is fixed (design, then uniform signal entries, then the
    error vector) so that per-stream outputs are stable across versions
    of the surrounding code.
    """
    g = rng.generator()
    n, p = spec.n, spec.p
    root_n = float(np.sqrt(n))
    if spec.family == "sparse":
        W = draw_design(n, ToeplitzSpec(p, spec.rho), spec.design, g)
        pi = np.zeros(p)
        block = {1: (2,), 2: (1, 2)}.get(spec.s, (1, 2, 3))
        for j in block:
            pi[j] = 2.0 / root_n
        if spec.s >= 4:
            extra = g.uniform(0.0, 4.0 / root_n, size=spec.s - 3)
            pi[0] = extra[0]
            pi[4 : spec.s] = extra[1:]
        pi[_SPARSE_TESTED] += spec.h / root_n
    else:
        W = g.standard_normal((n, p))
        pi = np.full(p, spec.amplitude / np.sqrt(p - 1))
        pi[0] = spec.h / root_n
    eps = _draw_errors(spec, g)
    y = W @ pi + eps
    return Dataset(W=W, y=y, tested_index=spec.tested_index), pi


def generate(spec: DgpSpec, rng: RngStream) -> Dataset:
    """Draw one dataset from the process."""
    return generate_with_truth(spec, rng)[0]


def _noise_scale(spec: DgpSpec) -> float:
    # Quasi-oracle inputs: the true error scale is handed to the
    # debiased baseline (raw t3 has variance 3).
    return float(np.sqrt(3.0)) if spec.error == "student_t3" else 1.0


def _precision(spec: DgpSpec):
    """True-precision quasi-oracle input for the debiased baseline.

    Raw t3 rows carry second moment 3*Sigma, so the inverse is scaled
    accordingly. Identity (None) when the truth is the identity.
    """
    scale = 3.0 if spec.design == "student_t3" else 1.0
    if spec.family == "sparse" and (spec.rho != 0.0 or scale != 1.0):
        return np.linalg.inv(scale * ToeplitzSpec(spec.p, spec.rho).matrix())
    return None


def _corrt_record(data, beta0, alpha, stream_id, theta_fit=None) -> RepRecord:
    start = time.perf_counter()
    if theta_fit is None:
        theta_fit = fit_theta(data)
    report = _report(beta0, alpha, fit_gamma(data, beta0), theta_fit)
    return RepRecord(
        stream_id=stream_id,
        t_stat=report.t_stat,
        reject=report.reject,
        a_hat_gamma=report.gamma_fit_meta.a_hat,
        a_hat_theta=report.theta_fit_meta.a_hat,
        fallback_gamma=report.gamma_fit_meta.used_fallback,
        fallback_theta=report.theta_fit_meta.used_fallback,
        wall_time=time.perf_counter() - start,
    )


def _debias_record(data, spec, beta0, alpha, precision, stream_id) -> RepRecord:
    start = time.perf_counter()
    report = debiased_wald_test(
        data.y,
        data.W,
        data.tested_index,
        beta0,
        alpha,
        precision=precision,
        noise_scale=_noise_scale(spec),
        lam=default_penalty(spec.n, spec.p),
    )
    return RepRecord(
        stream_id=stream_id,
        t_stat=report.t_stat,
        reject=report.reject,
        a_hat_gamma=None,
        a_hat_theta=None,
        fallback_gamma=None,
        fallback_theta=None,
        wall_time=time.perf_counter() - start,
    )


def _failed(stream_id, start, exc) -> RepRecord:
    return RepRecord(
        stream_id=stream_id,
        t_stat=None,
        reject=None,
        a_hat_gamma=None,
        a_hat_theta=None,
        fallback_gamma=None,
        fallback_theta=None,
        wall_time=time.perf_counter() - start,
        error=f"{type(exc).__name__}: {exc}",
    )


def _run_one(args) -> RepRecord:
    spec, method, alpha, master_seed, k, precision = args
    start = time.perf_counter()
    try:
        data = generate(spec, RngStream(master_seed, k))
        if method == "corrt":
            return _corrt_record(data, spec.null_value, alpha, k)
        return _debias_record(data, spec, spec.null_value, alpha, precision, k)
    except CorrtError as exc:
        return _failed(k, start, exc)


def _power_one(args) -> tuple[RepRecord, ...]:
    # One replication evaluated on the whole h grid. The design and the
    # error draw do not depend on h, so the theta-side fit is shared.
    spec, method, alpha, master_seed, k, precision, h_grid = args
    records = []
    theta_fit = None
    for h in h_grid:
        shifted = replace(spec, h=h)
        start = time.perf_counter()
        try:
            data = generate(shifted, RngStream(master_seed, k))
            if method == "corrt":
                if theta_fit is None:
                    theta_fit = fit_theta(data)
                records.append(
                    _corrt_record(data, shifted.null_value, alpha, k, theta_fit)
                )
            else:
                records.append(
                    _debias_record(
                        data, shifted, shifted.null_value, alpha, precision, k
                    )
                )
        except CorrtError as exc:
            records.append(_failed(k, start, exc))
    return tuple(records)


def _check_run_args(method, alpha, reps, threads):
    if method not in ("corrt", "debias"):
        raise DataError("method must be 'corrt' or 'debias'")
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie strictly in (0, 1)")
    if not (isinstance(reps, (int, np.integer)) and reps >= 1):
        raise DataError("reps must be a positive integer")
    if not (isinstance(threads, (int, np.integer)) and threads >= 1):
        raise DataError("threads must be a positive integer")


def _map_jobs(worker, jobs, threads):
    if threads == 1:
        return [worker(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(worker, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def _aggregate(spec, method, alpha, reps, records) -> McResult:
    failures = sum(1 for r in records if r.error is not None)
    if failures > FAILURE_BUDGET * reps:
        raise HarnessError(
            f"{failures} of {reps} replications failed; first error: "
            f"{next(r.error for r in records if r.error is not None)}"
        )
    rejections = sum(1 for r in records if r.error is None and r.reject)
    rate = rejections / reps
    return McResult(
        spec=spec,
        method=method,
        alpha=float(alpha),
        reps=int(reps),
        rejections=rejections,
        rejection_rate=rate,
        mc_stderr=float(np.sqrt(rate * (1.0 - rate) / reps)),
        failures=failures,
        per_rep_records=tuple(records),
    )


def run_mc(spec: DgpSpec, method: str, alpha: float, reps: int, master_seed: int,
           threads: int = 1) -> McResult:
    """Monte Carlo rejection rate of one method on one process cell."""
    _check_run_args(method, alpha, reps, threads)
    precision = _precision(spec) if method == "debias" else None
    jobs = [(spec, method, alpha, master_seed, k, precision) for k in range(reps)]
    return _aggregate(spec, method, alpha, reps, _map_jobs(_run_one, jobs, threads))


def power_curve(spec: DgpSpec, method: str, alpha: float, reps: int, h_grid,
                master_seed: int, threads: int = 1) -> list[McResult]:
    """One McResult per h, all sharing the same per-replication seeds.

    The h=0 entry coincides with run_mc on the same spec and seed.
    """
    _check_run_args(method, alpha, reps, threads)
    h_grid = tuple(float(h) for h in h_grid)
    if not h_grid:
        raise DataError("h grid must be nonempty")
    precision = _precision(spec) if method == "debias" else None
    jobs = [
        (spec, method, alpha, master_seed, k, precision, h_grid)
        for k in range(reps)
    ]
    per_rep = _map_jobs(_power_one, jobs, threads)
    results = []
    for i, h in enumerate(h_grid):
        records = [rep[i] for rep in per_rep]
        results.append(
            _aggregate(replace(spec, h=h), method, alpha, reps, records)
        )
    return results


def _spec_fields(spec: DgpSpec) -> dict:
    return {
        "family": spec.family,
        "n": spec.n,
        "p": spec.p,
        "design": spec.design,
        "rho": spec.rho,
        "error": spec.error,
        "s": "" if spec.s is None else spec.s,
        "amplitude": "" if spec.amplitude is None else spec.amplitude,
        "h": spec.h,
    }


CSV_COLUMNS = [
    "family", "n", "p", "design", "rho", "error", "s", "amplitude", "h",
    "method", "alpha", "reps", "rejections", "rejection_rate", "mc_stderr",
    "failures",
]


def to_csv(results, path) -> None:
    """One row per cell; plot-ready, no per-rep detail."""
    rows = []
    for res in results:
        row = _spec_fields(res.spec)
        row.update(
            method=res.method,
            alpha=res.alpha,
            reps=res.reps,
            rejections=res.rejections,
            rejection_rate=res.rejection_rate,
            mc_stderr=res.mc_stderr,
            failures=res.failures,
        )
        rows.append(row)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def _record_dict(record: RepRecord) -> dict:
    # wall_time is intentionally not exported: output files must be
    # bitwise reproducible across reruns and thread counts.
    return {
        "stream_id": record.stream_id,
        "t_stat": record.t_stat,
        "reject": record.reject,
        "a_hat_gamma": record.a_hat_gamma,
        "a_hat_theta": record.a_hat_theta,
        "fallback_gamma": record.fallback_gamma,
        "fallback_theta": record.fallback_theta,
        "error": record.error,
    }


def result_payload(res: McResult) -> dict:
    """JSON-ready dictionary for one cell, including per-rep records."""
    payload = _spec_fields(res.spec)
    payload.update(
        method=res.method,
        alpha=res.alpha,
        reps=res.reps,
        rejections=res.rejections,
        rejection_rate=res.rejection_rate,
        mc_stderr=res.mc_stderr,
        failures=res.failures,
        records=[_record_dict(r) for r in res.per_rep_records],
    )
    return payload


def to_json(results, path, config_echo=None) -> None:
    """Full per-rep records plus the echoed configuration."""
    body = {
        "config": dict(sorted((config_echo or {}).items())),
        "results": [result_payload(r) for r in results],
    }
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
