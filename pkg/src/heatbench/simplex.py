"""Dense two-phase simplex for small linear programs.

Solves   min c.x   s.t.  A x <= b,  x >= 0   (b may be negative).

Rows with negative right-hand sides are negated and given artificial
variables; phase 1 drives the artificials to zero, phase 2 optimizes the
original objective.  Dantzig pricing with a switch to Bland's rule on
long degenerate streaks.  Two safeguards keep the dense tableau honest on
the degenerate, rank-deficient subproblems receding-horizon control
produces: pivots are only taken on sufficiently large elements, and the
tableau is refactorized from the basis (B^-1 [A | b] recomputed from the
original data) periodically and whenever pricing and the ratio test
disagree, so roundoff cannot accumulate into false verdicts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COST_TOL = 1e-9          # reduced cost threshold for optimality
FEAS_TOL = 1e-9          # right-hand-side feasibility threshold
PIVOT_TOL = 1e-7         # minimum acceptable pivot element
RATIO_TIE_TOL = 1e-9
DEGENERATE_STREAK_LIMIT = 64
REFACTOR_EVERY = 256


class LpError(RuntimeError):
    pass


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    objective: float
    status: str          # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    iterations: int
    basis: np.ndarray | None = None   # optimal basis, reusable as a warm start

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Simplex tableau with on-demand refactorization from original data."""

    def __init__(self, a_ext: np.ndarray, b: np.ndarray, basis: np.ndarray):
        self.a_ext = a_ext            # m x ncols, immutable original columns
        self.b = b                    # m, original right-hand side (>= 0)
        self.basis = basis            # m basic column indices
        self.m, self.ncols = a_ext.shape
        self.costs: np.ndarray | None = None
        self.rows = np.hstack([a_ext, b[:, None]]).astype(float)
        self.obj = np.zeros(self.ncols + 1)

    def set_objective(self, costs: np.ndarray) -> None:
        """Swap the cost vector; the reduced costs rebuild from current rows."""
        self.costs = costs
        self._rebuild_obj()

    def _rebuild_obj(self) -> None:
        cb = self.costs[self.basis]
        self.obj = np.hstack([self.costs, 0.0]) - cb @ self.rows

    def refactorize(self) -> None:
        """Recompute B^-1 [A | b] from the original data (accuracy refresh)."""
        b_mat = self.a_ext[:, self.basis]
        rhs = np.hstack([self.a_ext, self.b[:, None]])
        self.rows = np.linalg.solve(b_mat, rhs)
        self._rebuild_obj()

    def try_refactorize(self) -> bool:
        try:
            self.refactorize()
            return True
        except np.linalg.LinAlgError:
            return False

    def pivot(self, row: int, col: int) -> None:
        pivot_row = self.rows[row] / self.rows[row, col]
        self.rows -= self.rows[:, col:col + 1] * pivot_row[None, :]
        self.rows[row] = pivot_row
        self.obj -= self.obj[col] * pivot_row
        self.basis[row] = col

    def objective_value(self) -> float:
        return float(self.costs[self.basis] @ self.rows[:, -1])

    def solution(self) -> np.ndarray:
        x = np.zeros(self.ncols)
        x[self.basis] = self.rows[:, -1]
        return x


def _iterate(tab: _Tableau, maxiter: int) -> tuple[str, int]:
    iters = 0
    degenerate_streak = 0
    since_refactor = 0
    retried_fresh = False
    while True:
        costs = tab.obj[:tab.ncols]
        if degenerate_streak > DEGENERATE_STREAK_LIMIT:
            candidates = np.where(costs < -COST_TOL)[0]     # Bland: first eligible
        else:
            order = np.argsort(costs)
            candidates = order[costs[order] < -COST_TOL]
        if len(candidates) == 0:
            return "optimal", iters
        if iters >= maxiter:
            return "iteration_limit", iters

        chosen = None
        for col in candidates:
            column = tab.rows[:, col]
            eligible = column > PIVOT_TOL
            if not np.any(eligible):
                continue
            rhs = np.maximum(tab.rows[:, -1], 0.0)
            ratios = np.full(tab.m, np.inf)
            ratios[eligible] = rhs[eligible] / column[eligible]
            best = ratios.min()
            ties = np.where(ratios <= best + RATIO_TIE_TOL)[0]
            row = int(ties[np.argmax(column[ties])])        # largest pivot among ties
            chosen = (int(col), row, best)
            break

        if chosen is None:
            # pricing says improvable but no safe pivot exists: rebuild from
            # the basis once to rule out roundoff, then believe the verdict
            if not retried_fresh and since_refactor > 0:
                if not tab.try_refactorize():
                    return "singular", iters
                since_refactor = 0
                retried_fresh = True
                continue
            return "unbounded", iters

        retried_fresh = False
        col, row, best = chosen
        degenerate_streak = degenerate_streak + 1 if best <= RATIO_TIE_TOL else 0
        tab.pivot(row, col)
        iters += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            if not tab.try_refactorize():
                return "singular", iters
            since_refactor = 0


def _dual_iterate(tab: _Tableau, maxiter: int) -> tuple[str, int]:
    """Dual simplex from a dual-feasible basis: repair b < 0, stay optimal.

    Requires the reduced-cost row to be nonnegative (true for the all-slack
    basis whenever c >= 0).  On success the basis is primal feasible and,
    dual feasibility being maintained, optimal.
    """
    iters = 0
    since_refactor = 0
    retried_fresh = False
    while True:
        rhs = tab.rows[:, -1]
        row = int(np.argmin(rhs))
        if rhs[row] >= -FEAS_TOL:
            return "feasible", iters
        if iters >= maxiter:
            return "iteration_limit", iters
        coeffs = tab.rows[row, :tab.ncols]
        eligible = coeffs < -PIVOT_TOL
        if not np.any(eligible):
            if not retried_fresh and since_refactor > 0:
                if not tab.try_refactorize():
                    return "singular", iters
                since_refactor = 0
                retried_fresh = True
                continue
            return "infeasible", iters
        retried_fresh = False
        ratios = np.full(tab.ncols, np.inf)
        reduced = np.maximum(tab.obj[:tab.ncols], 0.0)
        ratios[eligible] = reduced[eligible] / (-coeffs[eligible])
        best = ratios.min()
        ties = np.where(ratios <= best + RATIO_TIE_TOL)[0]
        col = int(ties[np.argmax(-coeffs[ties])])
        tab.pivot(row, col)
        iters += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            if not tab.try_refactorize():
                return "singular", iters
            since_refactor = 0


def _finish(tab: _Tableau, c: np.ndarray, n: int, status: str,
            iters: int) -> LpResult | None:
    if status == "infeasible":
        return LpResult(np.full(n, np.nan), np.nan, "infeasible", iters)
    if status not in ("feasible", "optimal"):
        return None
    solution = tab.solution()[:n]
    return LpResult(solution, float(c @ solution), "optimal", iters,
                    basis=tab.basis.copy())


def _solve_warm(c: np.ndarray, a: np.ndarray, b: np.ndarray, maxiter: int,
                basis_init: np.ndarray) -> LpResult | None:
    """Restart from a previous basis (dual or primal repair as needed).

    Returns None when the basis is unusable; the caller falls back to a
    cold start.
    """
    m, n = a.shape
    if len(basis_init) != m or np.any(basis_init < 0) or np.any(basis_init >= n + m):
        return None
    a_ext = np.hstack([a, np.eye(m)])
    tab = _Tableau(a_ext, b.copy(), basis_init.astype(int).copy())
    tab.costs = np.concatenate([c, np.zeros(m)])
    try:
        tab.refactorize()
    except np.linalg.LinAlgError:
        return None
    primal_ok = np.all(tab.rows[:, -1] >= -FEAS_TOL)
    if primal_ok:
        status, iters = _iterate(tab, maxiter)
        if status != "optimal":
            return None
        return _finish(tab, c, n, status, iters)
    # Mixed state: repair feasibility with dual pivots (negative reduced
    # costs are clamped in the ratio test), then let the primal mop-up
    # restore optimality.  Capped, and an "infeasible" verdict is not
    # trusted from here: a wandering repair falls back to a cold start.
    status, iters = _dual_iterate(tab, min(maxiter, 4 * m + 50))
    if status != "feasible":
        return None
    status, extra = _iterate(tab, maxiter - iters)
    iters += extra
    if status != "optimal":
        return None
    return _finish(tab, c, n, status, iters)


def _solve_dual_start(c: np.ndarray, a: np.ndarray, b: np.ndarray,
                      maxiter: int) -> LpResult | None:
    """Fast path for c >= 0: dual simplex from the all-slack basis.

    Returns None to fall back to the two-phase primal on anomalies.
    """
    m, n = a.shape
    a_ext = np.hstack([a, np.eye(m)])
    tab = _Tableau(a_ext, b.copy(), np.arange(n, n + m))
    tab.b = b.copy()    # may be negative; the dual iteration repairs it
    tab.rows = np.hstack([a_ext, b[:, None]]).astype(float)
    tab.set_objective(np.concatenate([c, np.zeros(m)]))
    status, iters = _dual_iterate(tab, maxiter)
    if status == "feasible":
        # roundoff may leave slightly negative reduced costs; mop up
        status, extra = _iterate(tab, maxiter - iters)
        iters += extra
        if status != "optimal":
            return None
    return _finish(tab, c, n, status, iters)


def solve_lp(c: np.ndarray, a_ub: np.ndarray, b_ub: np.ndarray,
             maxiter: int = 20000, basis_init: np.ndarray | None = None) -> LpResult:
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float)
    if a.ndim != 2 or a.shape != (len(b), len(c)):
        raise LpError(f"shape mismatch: A {a.shape}, b {b.shape}, c {c.shape}")
    m, n = a.shape

    if basis_init is not None:
        result = _solve_warm(c, a, b, maxiter, np.asarray(basis_init))
        if result is not None:
            return result
    if np.all(c >= 0.0) and np.any(b < 0.0):
        result = _solve_dual_start(c, a, b, maxiter)
        if result is not None:
            return result

    negate = b < 0.0
    a = np.where(negate[:, None], -a, a)
    b = np.where(negate, -b, b)
    slack = np.diag(np.where(negate, -1.0, 1.0))
    art_rows = np.where(negate)[0]
    k = len(art_rows)
    art = np.zeros((m, k))
    art[art_rows, np.arange(k)] = 1.0

    a_ext = np.hstack([a, slack, art])
    basis = np.where(negate, 0, np.arange(n, n + m))
    basis[art_rows] = n + m + np.arange(k)
    tab = _Tableau(a_ext, b, basis.astype(int))

    total_iters = 0
    if k > 0:
        phase1 = np.zeros(n + m + k)
        phase1[n + m:] = 1.0
        tab.set_objective(phase1)
        status, iters = _iterate(tab, maxiter)
        total_iters += iters
        if status == "unbounded":
            status = "infeasible"   # phase 1 is bounded below; only numerics end here
        if status != "optimal":
            return LpResult(np.full(n, np.nan), np.nan, status, total_iters)
        if tab.objective_value() > 1e-7:
            return LpResult(np.full(n, np.nan), np.nan, "infeasible", total_iters)
        for row in range(m):
            if tab.basis[row] >= n + m:     # drive leftover artificials out
                nonzero = np.where(np.abs(tab.rows[row, :n + m]) > PIVOT_TOL)[0]
                if len(nonzero) > 0:
                    tab.pivot(row, int(nonzero[0]))
                    total_iters += 1
        keep = tab.basis < n + m            # rows still pinned to an artificial
        if not np.all(keep):                # carry no information: drop them
            tab.a_ext = tab.a_ext[keep]
            tab.b = tab.b[keep]
            tab.basis = tab.basis[keep]
            tab.rows = tab.rows[keep]
            tab.m = int(keep.sum())
        tab.a_ext = tab.a_ext.copy()
        tab.a_ext[:, n + m:] = 0.0          # retire artificial columns entirely:
        tab.rows[:, n + m:-1] = 0.0         # zero reduced costs, never priced again

    tab.set_objective(np.concatenate([c, np.zeros(m + k)]))
    status, iters = _iterate(tab, maxiter - total_iters)
    total_iters += iters
    if status != "optimal":
        return LpResult(np.full(n, np.nan), np.nan, status, total_iters)

    solution = tab.solution()[:n]
    return LpResult(solution, float(c @ solution), "optimal", total_iters)


__all__ = ["LpError", "LpResult", "solve_lp"]
