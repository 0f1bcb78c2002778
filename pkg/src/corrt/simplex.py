"""Dense revised-simplex solver for standard-form programs with a scalar
right-hand-side parameter.

The program family is

    minimize    c @ x
    subject to  A @ x <= b0 + a * b1,    x >= 0,

for a scalar parameter ``a``. :func:`solve_at` solves one instance.
:func:`solve_path` tracks the optimum as ``a`` sweeps an interval: within
each maximal interval sharing an optimal basis the solution is affine in
``a`` and the optimal objective is piecewise linear and convex, so the
path is fully described by breakpoints plus per-interval affine data.

The set of parameters with a feasible program is always an interval: the
pairs (x, a) satisfying the constraints form a polyhedron and the feasible
``a`` values are its projection onto the ``a`` axis. The path is therefore
traced by dual-simplex continuation outward from one anchor solve, and
infeasibility on either side is conclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

from .errors import SolverError

__all__ = [
    "DescendingPath",
    "LPResult",
    "ParametricLP",
    "PathSolution",
    "solve_at",
    "solve_path",
]

_FEAS_TOL = 1e-8
_DUAL_TOL = 1e-9
_PIV_TOL = 1e-9
_MERGE_TOL = 1e-10
_REFACTOR_EVERY = 200


@dataclass(frozen=True)
class ParametricLP:
    """Immutable program data. All arrays are validated dense float64."""

    c: np.ndarray
    A: np.ndarray
    b0: np.ndarray
    b1: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.c, dtype=np.float64))
        A = np.ascontiguousarray(np.asarray(self.A, dtype=np.float64))
        b0 = np.ascontiguousarray(np.asarray(self.b0, dtype=np.float64))
        b1 = np.ascontiguousarray(np.asarray(self.b1, dtype=np.float64))
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        m, nv = A.shape
        if c.shape != (nv,):
            raise ValueError(f"c has shape {c.shape}, expected ({nv},)")
        if b0.shape != (m,) or b1.shape != (m,):
            raise ValueError("b0 and b1 must match the row count of A")
        for name, arr in (("c", c), ("A", A), ("b0", b0), ("b1", b1)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b0", b0)
        object.__setattr__(self, "b1", b1)

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0]

    @property
    def num_variables(self) -> int:
        return self.A.shape[1]

    def rhs(self, a: float) -> np.ndarray:
        return self.b0 + float(a) * self.b1

    def dump(self) -> str:
        """Plain-text rendering of the program for external cross-checks."""
        lines = ["min " + " + ".join(f"{cj:g}*x{j}" for j, cj in enumerate(self.c))]
        for i in range(self.num_constraints):
            terms = " + ".join(f"{v:g}*x{j}" for j, v in enumerate(self.A[i]) if v != 0.0)
            lines.append(f"  {terms or '0'} <= {self.b0[i]:g} + a*{self.b1[i]:g}")
        lines.append("  x >= 0")
        return "\n".join(lines)


@dataclass(frozen=True)
class LPResult:
    """Outcome of one solve.

    ``basis`` indexes columns of [A | I]; entries below ``num_variables``
    are structural, the rest are slacks. For optimal results ``dual`` holds
    multipliers y <= 0 with y @ A <= c, and ``dual_gap`` the weak-duality
    residual |c @ x - y @ rhs|.
    """

    status: str
    a: float
    x: np.ndarray | None = None
    objective: float | None = None
    basis: np.ndarray | None = None
    slack_margins: np.ndarray | None = None
    dual: np.ndarray | None = None
    dual_gap: float | None = None
    infeasibility: float | None = None


class _Solver:
    """Revised simplex working state over the column system [A | I]."""

    def __init__(self, lp: ParametricLP):
        self.lp = lp
        self.m = lp.num_constraints
        self.nv = lp.num_variables
        self.n_cols = self.nv + self.m
        self.cost = np.concatenate([lp.c, np.zeros(self.m)])
        self.pivot_cap = 50 * (self.m + self.nv)
        self.A_T = np.ascontiguousarray(lp.A.T)
        self.basis: np.ndarray | None = None
        self.B_inv: np.ndarray | None = None

    # Column j of [A | I | artificials]; art_rows maps appended columns to rows.
    def column(self, j: int, art_rows=None) -> np.ndarray:
        if j < self.nv:
            return self.lp.A[:, j]
        col = np.zeros(self.m)
        if j < self.n_cols:
            col[j - self.nv] = 1.0
        else:
            col[art_rows[j - self.n_cols]] = -1.0
        return col

    def _ftran(self, B_inv: np.ndarray, j: int, art_rows=None) -> np.ndarray:
        """B_inv times column j without materializing slack columns."""
        if j < self.nv:
            return B_inv @ self.A_T[j]
        if j < self.n_cols:
            return B_inv[:, j - self.nv].copy()
        return -B_inv[:, art_rows[j - self.n_cols]]

    def _price(self, y: np.ndarray, art_rows=None) -> np.ndarray:
        vals = [y @ self.lp.A, y]
        if art_rows is not None:
            vals.append(-y[art_rows])
        return np.concatenate(vals)

    def _refactor(self, basis: np.ndarray, art_rows=None) -> np.ndarray:
        B = np.column_stack([self.column(int(j), art_rows) for j in basis])
        try:
            return np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SolverError("basis matrix became singular") from exc

    @staticmethod
    def _eta_update(B_inv: np.ndarray, alpha: np.ndarray, r: int) -> None:
        B_inv[r] /= alpha[r]
        rest = alpha.copy()
        rest[r] = 0.0
        # In-place rank-1 update; the transposed view is Fortran-ordered,
        # which lets the BLAS call reuse the buffer instead of copying.
        dger(-1.0, B_inv[r], rest, a=B_inv.T, overwrite_a=1)

    def _reprice(self, basis, B_inv, b, cost, n_allowed, art_rows):
        x_B = B_inv @ b
        y = cost[basis] @ B_inv
        d = cost[:n_allowed] - self._price(y, art_rows)[:n_allowed]
        d[basis[basis < n_allowed]] = 0.0
        return x_B, d

    def _primal_loop(self, basis, B_inv, b, cost, n_allowed, art_rows=None):
        """Run primal simplex to optimality from a feasible basis.

        Returns (status, basis, B_inv). Devex pricing with a switch to
        Bland's rule after 10 * m consecutive degenerate steps. The basic
        solution, reduced costs, and reference weights are updated
        incrementally from the pivot row and refreshed at every
        refactorization; an optimality claim from drifted reduced costs
        is verified against a fresh repricing before it is accepted.
        """
        m = self.m
        stall = 0
        bland = False
        x_B, d = self._reprice(basis, B_inv, b, cost, n_allowed, art_rows)
        weights = np.ones(n_allowed)
        for it in range(self.pivot_cap):
            if it and it % _REFACTOR_EVERY == 0:
                B_inv = self._refactor(basis, art_rows)
                x_B, d = self._reprice(basis, B_inv, b, cost, n_allowed, art_rows)
                weights = np.ones(n_allowed)
            if bland:
                entering = np.flatnonzero(d < -_DUAL_TOL)
                j = int(entering[0]) if entering.size else -1
            else:
                neg = d < -_DUAL_TOL
                if neg.any():
                    score = np.where(neg, d * d / weights, 0.0)
                    j = int(np.argmax(score))
                else:
                    j = -1
            if j < 0:
                x_B, d = self._reprice(basis, B_inv, b, cost, n_allowed, art_rows)
                if d.min() >= -_DUAL_TOL:
                    return "optimal", basis, B_inv
                continue
            alpha = self._ftran(B_inv, j, art_rows)
            pos = alpha > _PIV_TOL
            if not pos.any():
                return "unbounded", basis, B_inv
            ratios = np.full(m, np.inf)
            ratios[pos] = np.maximum(x_B[pos], 0.0) / alpha[pos]
            theta = ratios.min()
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            stall = stall + 1 if theta <= 1e-12 else 0
            if stall > 10 * m:
                bland = True
            d_j = d[j]
            w_j = weights[j]
            leave = int(basis[r])
            basis[r] = j
            self._eta_update(B_inv, alpha, r)
            x_B -= theta * alpha
            x_B[r] = theta
            w = self._price(B_inv[r], art_rows)[:n_allowed]
            d -= d_j * w
            d[basis[basis < n_allowed]] = 0.0
            np.maximum(weights, w * w * w_j, out=weights)
            if leave < n_allowed:
                weights[leave] = max(w_j / (alpha[r] * alpha[r]), 1.0)
        raise SolverError(f"pivot cap {self.pivot_cap} exceeded in primal simplex")

    def solve(self, a: float):
        """Two-phase solve at a fixed parameter. Returns an LPResult."""
        m, nv = self.m, self.nv
        b = self.lp.rhs(a)
        neg = np.flatnonzero(b < 0.0)

        basis = np.arange(nv, nv + m)
        B_inv = np.eye(m)
        if neg.size:
            art_rows = neg
            n_art = neg.size
            cost1 = np.zeros(self.n_cols + n_art)
            cost1[self.n_cols:] = 1.0
            basis[neg] = self.n_cols + np.arange(n_art)
            diag = np.ones(m)
            diag[neg] = -1.0
            B_inv = np.diag(diag)
            status, basis, B_inv = self._primal_loop(
                basis, B_inv, b, cost1, self.n_cols + n_art, art_rows
            )
            if status != "optimal":
                raise SolverError("phase 1 terminated abnormally")
            x_B = np.maximum(B_inv @ b, 0.0)
            art_value = float(x_B[basis >= self.n_cols].sum())
            if art_value > _FEAS_TOL * (1.0 + np.abs(b).max(initial=0.0)):
                return LPResult(status="infeasible", a=float(a), infeasibility=art_value)
            basis, B_inv = self._purge_artificials(basis, B_inv, art_rows)

        status, basis, B_inv = self._primal_loop(basis, B_inv, b, self.cost, self.n_cols)
        self.basis, self.B_inv = basis, B_inv
        if status == "unbounded":
            return LPResult(status="unbounded", a=float(a))
        return self._package(a, b, basis, B_inv)

    def _purge_artificials(self, basis, B_inv, art_rows):
        # [A | I] has full row rank, so each zero-valued artificial can be
        # swapped for a real column with a nonzero entry in its row.
        for r in np.flatnonzero(basis >= self.n_cols):
            w = np.concatenate([B_inv[r] @ self.lp.A, B_inv[r]])
            w[basis[basis < self.n_cols]] = 0.0
            j = int(np.argmax(np.abs(w)))
            if abs(w[j]) <= _PIV_TOL:
                raise SolverError("could not drive artificial out of basis")
            alpha = self._ftran(B_inv, j)
            basis[r] = j
            self._eta_update(B_inv, alpha, r)
        return basis, B_inv

    def _package(self, a, b, basis, B_inv) -> LPResult:
        x_B = B_inv @ b
        x = np.zeros(self.nv)
        struct = basis < self.nv
        x[basis[struct]] = x_B[struct]
        x[np.abs(x) < 1e-14] = 0.0
        y = self.cost[basis] @ B_inv
        objective = float(self.lp.c @ x)
        return LPResult(
            status="optimal",
            a=float(a),
            x=x,
            objective=objective,
            basis=basis.copy(),
            slack_margins=b - self.lp.A @ x,
            dual=y,
            dual_gap=abs(objective - float(y @ b)),
        )


@dataclass
class _Segment:
    """One maximal parameter interval sharing an optimal basis.

    The basic solution over the interval is x_B(a) = g + a * q.
    """

    lo: float
    hi: float
    basis: np.ndarray
    g: np.ndarray
    q: np.ndarray


def _segment_structural(lp: ParametricLP, seg: _Segment, a: float) -> np.ndarray:
    x = np.zeros(lp.num_variables)
    x_B = seg.g + a * seg.q
    struct = seg.basis < lp.num_variables
    x[seg.basis[struct]] = np.maximum(x_B[struct], 0.0)
    return x


def _segment_solution(lp: ParametricLP, seg: _Segment, a: float) -> LPResult:
    x = _segment_structural(lp, seg, a)
    objective = float(lp.c @ x)
    return LPResult(
        status="optimal",
        a=a,
        x=x,
        objective=objective,
        basis=seg.basis.copy(),
        slack_margins=lp.rhs(a) - lp.A @ x,
    )


@dataclass
class PathSolution:
    """Optimal solution path over a parameter window [a_min, a_max].

    ``segments`` cover the feasible part of the window in increasing
    order; ``feasible_range`` is its extent (None when the program is
    infeasible on the whole window). Parameters outside the feasible
    range but inside the window are infeasible, reported as gaps.
    """

    lp: ParametricLP
    a_min: float
    a_max: float
    segments: list[_Segment] = field(default_factory=list)
    feasible_range: tuple[float, float] | None = None

    @property
    def breakpoints(self) -> np.ndarray:
        if not self.segments:
            return np.array([])
        pts = [s.lo for s in self.segments] + [self.segments[-1].hi]
        out = [pts[0]]
        for p in pts[1:]:
            if p - out[-1] > _MERGE_TOL:
                out.append(p)
        return np.array(out)

    @property
    def gaps(self) -> list[tuple[float, float]]:
        if self.feasible_range is None:
            return [(self.a_min, self.a_max)]
        lo, hi = self.feasible_range
        out = []
        if lo > self.a_min + _MERGE_TOL:
            out.append((self.a_min, lo))
        if hi < self.a_max - _MERGE_TOL:
            out.append((hi, self.a_max))
        return out

    @property
    def vertices(self) -> list[np.ndarray]:
        return [self._structural(s, s.lo) for s in self.segments]

    def _structural(self, seg: _Segment, a: float) -> np.ndarray:
        return _segment_structural(self.lp, seg, a)

    def _segment_for(self, a: float) -> _Segment | None:
        if self.feasible_range is None:
            return None
        lo, hi = self.feasible_range
        if a < lo - _MERGE_TOL or a > hi + _MERGE_TOL:
            return None
        for seg in self.segments:
            if a <= seg.hi + _MERGE_TOL:
                return seg
        return self.segments[-1]

    def solution_at(self, a: float) -> LPResult:
        """Exact optimum at ``a`` by affine interpolation within a segment."""
        a = float(a)
        if not (self.a_min - _MERGE_TOL <= a <= self.a_max + _MERGE_TOL):
            raise ValueError(f"parameter {a} outside the traced window")
        seg = self._segment_for(a)
        if seg is None:
            return LPResult(status="infeasible", a=a)
        return _segment_solution(self.lp, seg, a)

    def objective_at(self, a: float) -> float | None:
        res = self.solution_at(a)
        return res.objective


def solve_at(lp: ParametricLP, a: float) -> LPResult:
    """Solve the program at one parameter value.

    Runs phase 1 only when the all-slack basis is infeasible, then primal
    simplex with Dantzig pricing, Bland fallback under stalling, periodic
    dense refactorization, and a hard pivot cap of 50 * (rows + columns).
    """
    a = float(a)
    if not np.isfinite(a):
        raise ValueError(f"parameter must be finite, got {a!r}")
    return _Solver(lp).solve(a)


class _Tracer:
    """Dual-simplex continuation of an optimal basis in the parameter."""

    def __init__(self, lp: ParametricLP, solver: _Solver):
        self.lp = lp
        self.solver = solver
        self.basis = solver.basis.copy()
        self.B_inv = solver.B_inv.copy()
        self.pivots = 0

    def _limits(self, g, q, a_cur, direction):
        # Basis stays primal feasible while g + a q >= 0 componentwise.
        if direction < 0:
            mask = q > _PIV_TOL
        else:
            mask = q < -_PIV_TOL
        if not mask.any():
            return None, None
        bounds = -g[mask] / q[mask]
        idx = np.flatnonzero(mask)
        if direction < 0:
            k = int(np.argmax(bounds))
        else:
            k = int(np.argmin(bounds))
        limit = float(bounds[k])
        # The basis is optimal at a_cur, so roundoff beyond a_cur is clamped.
        if direction < 0:
            limit = min(limit, a_cur)
        else:
            limit = max(limit, a_cur)
        return limit, int(idx[k])

    def trace(self, a_start: float, a_stop: float, direction: int) -> list[_Segment]:
        return list(self.iter_trace(a_start, a_stop, direction))

    def iter_trace(self, a_start: float, a_stop: float, direction: int):
        """Yield segments outward from a_start until a_stop or infeasibility."""
        lp, solver = self.lp, self.solver
        m = solver.m
        yielded = False
        a_cur = a_start
        stall = 0
        bland = False
        while True:
            if self.pivots and self.pivots % _REFACTOR_EVERY == 0:
                self.B_inv = solver._refactor(self.basis)
            g = self.B_inv @ lp.b0
            q = self.B_inv @ lp.b1
            limit, r = self._limits(g, q, a_cur, direction)
            if (
                limit is None
                or (direction < 0 and limit <= a_stop + _MERGE_TOL)
                or (direction > 0 and limit >= a_stop - _MERGE_TOL)
            ):
                seg_lo, seg_hi = (a_stop, a_cur) if direction < 0 else (a_cur, a_stop)
                yield _Segment(seg_lo, seg_hi, self.basis.copy(), g, q)
                return
            seg_lo, seg_hi = (limit, a_cur) if direction < 0 else (a_cur, limit)
            if seg_hi - seg_lo > _MERGE_TOL:
                yield _Segment(seg_lo, seg_hi, self.basis.copy(), g, q)
                yielded = True
            # Dual pivot on the binding row to continue past the breakpoint.
            y = solver.cost[self.basis] @ self.B_inv
            d = np.maximum(solver.cost - solver._price(y), 0.0)
            d[self.basis] = 0.0
            w = np.concatenate([self.B_inv[r] @ lp.A, self.B_inv[r]])
            w[self.basis] = 0.0
            cand = np.flatnonzero(w < -_PIV_TOL)
            if cand.size == 0:
                # No dual pivot exists: infeasible beyond the breakpoint.
                if not yielded:
                    yield _Segment(limit, limit, self.basis.copy(), g, q)
                return
            ratios = d[cand] / -w[cand]
            ties = cand[ratios <= ratios.min() + 1e-12]
            if bland:
                j = int(ties.min())
            else:
                j = int(ties[np.argmax(np.abs(w[ties]))])
            alpha = solver._ftran(self.B_inv, j)
            self.basis[r] = j
            solver._eta_update(self.B_inv, alpha, r)
            self.pivots += 1
            if self.pivots > solver.pivot_cap:
                raise SolverError("degenerate breakpoint accumulation exceeded the pivot cap")
            stall = stall + 1 if abs(limit - a_cur) <= _MERGE_TOL else 0
            if stall > 10 * m:
                bland = True
            a_cur = limit


def solve_path(lp: ParametricLP, a_min: float, a_max: float) -> PathSolution:
    """Trace the full solution path over [a_min, a_max].

    One anchor solve finds an optimal basis (probing a few interior
    parameters when the top of the window is infeasible); dual-simplex
    continuation then extends it in both directions. Because the feasible
    parameter set is an interval, a failed probe sweep certifies
    infeasibility of the whole window.
    """
    a_min, a_max = float(a_min), float(a_max)
    if not (a_min < a_max):
        raise ValueError("a_min must be strictly below a_max")

    solver = _Solver(lp)
    anchor = None
    for a_try in np.linspace(a_max, a_min, 9):
        res = solver.solve(float(a_try))
        if res.status == "optimal":
            anchor = float(a_try)
            break
        if res.status == "unbounded":
            raise SolverError(f"objective unbounded at parameter {a_try}")
    path = PathSolution(lp=lp, a_min=a_min, a_max=a_max)
    if anchor is None:
        return path

    down = _Tracer(lp, solver).trace(anchor, a_min, -1)
    segments = list(reversed(down))
    if anchor < a_max:
        up = _Tracer(lp, solver).trace(anchor, a_max, +1)
        # Avoid duplicating the zero-length anchor segment.
        segments.extend(s for s in up if s.hi - s.lo > _MERGE_TOL or not segments)
    path.segments = [s for s in segments if s.hi - s.lo > _MERGE_TOL] or segments[:1]
    lo = path.segments[0].lo
    hi = path.segments[-1].hi
    path.feasible_range = (lo, hi)
    return path


class DescendingPath:
    """Lazily traced solution path, consumed from the top of a window down.

    Built for searches that scan the parameter downward and usually stop
    well above the bottom: one anchor solve at ``a_hi``, then dual-simplex
    continuation extends the traced region only as far as queries require.
    When the top of the window is infeasible nothing is traced; the caller
    decides what that implies (for programs with b1 >= 0 feasibility is
    monotone in the parameter, so the whole window is infeasible).
    """

    def __init__(self, lp: ParametricLP, a_hi: float, a_lo: float):
        a_hi, a_lo = float(a_hi), float(a_lo)
        if not (a_lo < a_hi):
            raise ValueError("a_lo must be strictly below a_hi")
        self.lp = lp
        self.a_hi = a_hi
        self.a_lo = a_lo
        self._segments: list[_Segment] = []
        self._iter = None
        solver = _Solver(lp)
        res = solver.solve(a_hi)
        self.top_status = res.status
        if res.status == "unbounded":
            raise SolverError(f"objective unbounded at parameter {a_hi}")
        if res.status == "optimal":
            self._iter = _Tracer(lp, solver).iter_trace(a_hi, a_lo, -1)

    def _extend_to(self, a: float) -> None:
        while self._iter is not None and (
            not self._segments or self._segments[-1].lo > a + _MERGE_TOL
        ):
            seg = next(self._iter, None)
            if seg is None:
                self._iter = None
            else:
                self._segments.append(seg)

    def solution_at(self, a: float) -> LPResult:
        """Optimum at ``a``, tracing further down the window if needed."""
        a = float(a)
        if not (self.a_lo - _MERGE_TOL <= a <= self.a_hi + _MERGE_TOL):
            raise ValueError(f"parameter {a} outside the search window")
        if self.top_status != "optimal":
            return LPResult(status="infeasible", a=a)
        self._extend_to(a)
        for seg in reversed(self._segments):
            if seg.lo - _MERGE_TOL <= a <= seg.hi + _MERGE_TOL:
                return _segment_solution(self.lp, seg, a)
        return LPResult(status="infeasible", a=a)
