"""Dense two-phase tableau simplex for small linear programs.

Solves ``min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0``.

Occupancy-measure programs are massively degenerate (every balance row has
a zero right-hand side), which stalls textbook pivoting for thousands of
iterations. The solver therefore runs the primal phases on a right-hand side
perturbed by seeded noise of size ``perturb``, carries the true right-hand
side along as a second column, and finishes with dual simplex pivots that
restore primal feasibility for the true data. Reduced costs never depend on
the right-hand side, so the final basis is optimal for the original LP.

Pivot choice is the most negative reduced cost, falling back to Bland's
smallest-index rule after a run of degenerate pivots (``rule="bland"``
uses Bland throughout). The final basis is re-solved against the original
matrix, so the returned point, duals and duality gap carry no tableau
round-off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, NumericalBreakdown, Unbounded

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-11
OPT_TOL = 1e-11
FEAS_TOL = 1e-9
DEGENERATE_STREAK = 50


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    duals_eq: np.ndarray
    duals_ub: np.ndarray
    iterations: int
    dual_iterations: int
    primal_residual: float
    min_reduced_cost: float
    duality_gap: float
    basis: np.ndarray


class _Tableau:
    """Rows ``0..m-1`` are constraints, row ``m`` holds reduced costs.

    Column ``-2`` is the working (perturbed) right-hand side, column ``-1``
    the true one.
    """

    def __init__(self, T: np.ndarray, basis: np.ndarray, rule: str):
        self.T = T
        self.basis = basis
        self.rule = rule
        self.iterations = 0
        self.dual_iterations = 0
        self._streak = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        colv = T[:, col].copy()
        colv[row] = 0.0
        nz = np.flatnonzero(colv)
        if nz.size:
            T[nz] -= np.outer(colv[nz], T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col

    def primal(self, allowed: np.ndarray, max_iter: int) -> None:
        T, m = self.T, self.m
        while True:
            if self.iterations >= max_iter:
                raise NumericalBreakdown(f"simplex exceeded {max_iter} iterations")
            rc = T[m, :-2]
            cand = np.flatnonzero((rc < -OPT_TOL) & allowed)
            if cand.size == 0:
                return
            bland = self.rule == "bland" or self._streak >= DEGENERATE_STREAK
            col = int(cand[0]) if bland else int(cand[np.argmin(rc[cand])])
            column = T[:m, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                raise Unbounded(f"column {col} is unbounded")
            ratios = T[rows, -2] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if bland:
                row = int(ties[np.argmin(self.basis[ties])])
            else:
                row = int(ties[np.argmax(column[ties])])
            self._streak = self._streak + 1 if best <= 1e-14 else 0
            self.pivot(row, col)
            self.iterations += 1

    def dual(self, allowed: np.ndarray, max_iter: int, tol: float) -> None:
        """Dual simplex on the working right-hand side; keeps reduced costs >= 0."""
        T, m = self.T, self.m
        while True:
            if self.dual_iterations >= max_iter:
                raise NumericalBreakdown(f"dual simplex exceeded {max_iter} iterations")
            rhs = T[:m, -2]
            bad = np.flatnonzero(rhs < -tol)
            if bad.size == 0:
                return
            row = int(bad[np.argmin(rhs[bad])])
            r = T[row, :-2]
            cand = np.flatnonzero((r < -PIVOT_TOL) & allowed)
            if cand.size == 0:
                raise Infeasible(f"row {row} cannot be made feasible")
            ratios = np.maximum(T[m, cand], 0.0) / -r[cand]
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12 * max(1.0, best)]
            col = int(ties[np.argmax(-r[ties])])
            self.pivot(row, col)
            self.dual_iterations += 1


def solve_lp(
    c,
    A_eq=None,
    b_eq=None,
    A_ub=None,
    b_ub=None,
    rule: str = "dantzig",
    perturb: float = 1e-7,
    seed: int = 0,
    max_iter: int | None = None,
) -> SimplexResult:
    if rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    c = np.asarray(c, dtype=float)
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub

    # structural | slacks | artificials | working rhs | true rhs
    A = np.zeros((m, n + m_ub))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    n_real = n + m_ub
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    b_work = b + perturb * scale * np.random.default_rng(seed).uniform(0.5, 1.0, m)

    needs_art = np.ones(m, dtype=bool)
    needs_art[m_eq:] = sign[m_eq:] < 0  # a slack is a valid starting basic otherwise
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    width = n_real + n_art
    T = np.zeros((m + 1, width + 2))
    T[:m, :n_real] = A
    T[art_rows, n_real + np.arange(n_art)] = 1.0
    T[:m, -2] = b_work
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    basis[art_rows] = n_real + np.arange(n_art)
    slack_rows = np.flatnonzero(~needs_art)
    basis[slack_rows] = n + (slack_rows - m_eq)

    if max_iter is None:
        max_iter = 50 * (m + width) + 1000
    tab = _Tableau(T, basis, rule)

    if n_art:
        T[m, :] = 0.0
        T[m, n_real:width] = 1.0
        T[m] -= T[art_rows].sum(axis=0)
        tab.primal(np.ones(width, dtype=bool), max_iter)
        if -T[m, -2] > FEAS_TOL * scale + 2 * perturb * scale * m:
            raise Infeasible(f"phase one ended with infeasibility {-T[m, -2]:.3e}")
        _drive_out_artificials(tab, n_real)

    keep = tab.basis >= 0
    if not np.all(keep):
        tab.T = np.vstack([tab.T[:m][keep], tab.T[m:]])
        tab.basis = tab.basis[keep]
    T, m = tab.T, tab.m
    cost = np.zeros(width)
    cost[:n] = c
    T[m, :] = 0.0
    T[m, :width] = cost
    for r, j in enumerate(tab.basis):
        if cost[j] != 0.0:
            T[m] -= cost[j] * T[r]
    allowed = np.zeros(width, dtype=bool)
    allowed[:n_real] = True
    tab.primal(allowed, max_iter)

    T[:, -2] = T[:, -1]
    tab.dual(allowed, max_iter, tol=1e-13 * scale)
    # dual pivots can leave tiny negative reduced costs; clean up with primal pivots
    tab.primal(allowed, max_iter)

    return _polish(tab, A, b, sign, c, n, m_eq, m_ub, keep)


def _drive_out_artificials(tab: _Tableau, n_real: int) -> None:
    T = tab.T
    for r in range(tab.m):
        if tab.basis[r] < n_real:
            continue
        row = T[r, :n_real]
        cols = np.flatnonzero(np.abs(row) > 1e-9)
        if cols.size:
            tab.pivot(r, int(cols[np.argmax(np.abs(row[cols]))]))
            tab.iterations += 1
        else:
            log.debug("dropping redundant constraint row %d", r)
            tab.basis[r] = -1


def _polish(tab, A, b, sign, c, n, m_eq, m_ub, keep) -> SimplexResult:
    rows = np.flatnonzero(keep)
    basis = tab.basis
    B = A[np.ix_(rows, basis)]
    cfull = np.concatenate([c, np.zeros(m_ub)])
    try:
        xB = np.linalg.solve(B, b[rows])
        y_rows = np.linalg.solve(B.T, cfull[basis])
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"final basis is singular: {exc}") from exc
    if np.any(xB < -FEAS_TOL):
        raise NumericalBreakdown(f"polished basic solution is infeasible (min {xB.min():.3e})")
    xfull = np.zeros(A.shape[1])
    xfull[basis] = np.clip(xB, 0.0, None)
    y = np.zeros(A.shape[0])
    y[rows] = y_rows
    reduced = cfull - A.T @ y
    residual = float(np.max(np.abs(A @ xfull - b), initial=0.0))
    objective = float(c @ xfull[:n])
    gap = abs(objective - float(b @ y))
    y = y * sign  # back to the caller's row orientation
    return SimplexResult(
        x=xfull[:n],
        objective=objective,
        duals_eq=y[:m_eq],
        duals_ub=y[m_eq:],
        iterations=tab.iterations,
        dual_iterations=tab.dual_iterations,
        primal_residual=residual,
        min_reduced_cost=float(reduced.min(initial=0.0)),
        duality_gap=gap,
        basis=basis.copy(),
    )
