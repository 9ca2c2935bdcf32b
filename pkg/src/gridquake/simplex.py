"""Dense two-phase tableau simplex for the small LPs arising in dispatch.

Problems here have at most a few hundred variables and rows (one island of a
24-bus network), so a dense tableau is simpler and fast enough. Dantzig
pricing is used until the objective stalls, then Bland's rule guarantees
termination; an iteration cap guards against numerical pathologies.

Interface mirrors the usual linprog conventions:

    minimize c @ x
    s.t.     a_ub @ x <= b_ub
             a_eq @ x == b_eq
             lo_i <= x_i <= hi_i   (None meaning unbounded)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TOL = 1e-9
_STALL_LIMIT = 50  # non-improving Dantzig pivots before switching to Bland


class NumericalError(RuntimeError):
    """Solver failed to terminate within the iteration cap."""


@dataclass
class LpResult:
    status: str          # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, bounds=None, max_iter=100_000) -> LpResult:
    """Solve a bounded LP by reduction to standard form plus two-phase simplex."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    a_ub = np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if bounds is None:
        bounds = [(0.0, None)] * n

    # Map each original variable onto nonnegative standard-form variables:
    #   finite lower bound lo:      x = lo + y,        y >= 0
    #   upper bound only (hi):      x = hi - y,        y >= 0
    #   free:                       x = y+ - y-,       y+, y- >= 0
    # Finite widths (hi - lo) become extra <= rows on y.
    cols: list[tuple[int, float, float]] = []  # (orig index, sign, shift): x_i = shift + sign * y
    extra_rows: list[tuple[int, float]] = []   # (std column, width) for y <= width
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None:
            cols.append((i, 1.0, lo))
            if hi is not None:
                extra_rows.append((len(cols) - 1, hi - lo))
        elif hi is not None:
            cols.append((i, -1.0, hi))
        else:
            cols.append((i, 1.0, 0.0))
            cols.append((i, -1.0, 0.0))

    m_std = len(cols)
    trans = np.zeros((n, m_std))
    shift = np.zeros(n)
    for j, (i, sign, off) in enumerate(cols):
        trans[i, j] = sign
        shift[i] += off  # free-variable pair contributes twice with zero offset

    c_std = c @ trans
    aub_std = a_ub @ trans
    bub_std = b_ub - a_ub @ shift
    aeq_std = a_eq @ trans
    beq_std = b_eq - a_eq @ shift
    if extra_rows:
        ub_extra = np.zeros((len(extra_rows), m_std))
        b_extra = np.zeros(len(extra_rows))
        for k, (j, width) in enumerate(extra_rows):
            if width < -_TOL:
                return LpResult("infeasible", None, None)
            ub_extra[k, j] = 1.0
            b_extra[k] = max(width, 0.0)
        aub_std = np.vstack([aub_std, ub_extra])
        bub_std = np.concatenate([bub_std, b_extra])

    y, status = _two_phase(c_std, aub_std, bub_std, aeq_std, beq_std, max_iter)
    if status != "optimal":
        return LpResult(status, None, None)
    x = shift + trans @ y
    return LpResult("optimal", x, float(c @ x))


def _two_phase(c, a_ub, b_ub, a_eq, b_eq, max_iter) -> tuple[np.ndarray | None, str]:
    """Standard-form simplex (x >= 0) with slack and artificial variables."""
    n = len(c)
    n_ub, n_eq = len(b_ub), len(b_eq)
    m = n_ub + n_eq

    a = np.vstack([a_ub, a_eq]) if m else np.zeros((0, n))
    b = np.concatenate([b_ub, b_eq])
    slack = np.vstack([np.eye(n_ub), np.zeros((n_eq, n_ub))]) if n_ub else np.zeros((m, 0))

    # Normalize to b >= 0 (flips slack signs on those rows).
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0
    if n_ub:
        slack[neg] *= -1.0

    # Rows whose slack column still enters the basis cleanly need no artificial.
    needs_art = np.ones(m, dtype=bool)
    basis = np.full(m, -1, dtype=int)
    for r in range(n_ub):
        if slack[r, r] > 0:
            needs_art[r] = False
            basis[r] = n + r
    n_art = int(needs_art.sum())
    art = np.zeros((m, n_art))
    k = 0
    for r in range(m):
        if needs_art[r]:
            art[r, k] = 1.0
            basis[r] = n + n_ub + k
            k += 1

    tab = np.hstack([a, slack, art, b[:, None]])
    total = n + n_ub + n_art

    # Phase 1: minimize the sum of artificial variables.
    if n_art:
        obj = np.zeros(total + 1)
        obj[n + n_ub : n + n_ub + n_art] = 1.0
        for r in range(m):
            if basis[r] >= n + n_ub:
                obj -= tab[r]
        it = _pivot_loop(tab, obj, basis, allowed=total, max_iter=max_iter)
        if -obj[-1] > 1e-7:
            return None, "infeasible"
        # Drive any artificial variables remaining in the basis out of it.
        for r in range(m):
            if basis[r] >= n + n_ub:
                piv = np.flatnonzero(np.abs(tab[r, : n + n_ub]) > _TOL)
                if len(piv):
                    _pivot(tab, None, basis, r, int(piv[0]))
                # A zero row is redundant; the artificial stays at zero.
        tab = np.hstack([tab[:, : n + n_ub], tab[:, -1:]])
        total = n + n_ub

    # Phase 2: minimize the true objective.
    obj = np.zeros(total + 1)
    obj[:n] = c
    for r in range(m):
        if basis[r] < total and abs(obj[basis[r]]) > 0:
            obj -= obj[basis[r]] * tab[r]
    it = _pivot_loop(tab, obj, basis, allowed=total, max_iter=max_iter)
    if it < 0:
        return None, "unbounded"

    x = np.zeros(total)
    for r in range(m):
        if basis[r] < total:
            x[basis[r]] = tab[r, -1]
    return x[:n], "optimal"


def _pivot(tab, obj, basis, row, col) -> None:
    tab[row] /= tab[row, col]
    pivot_row = tab[row]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    touched = np.flatnonzero(np.abs(col_vals) > 1e-14)
    if len(touched):
        tab[touched] -= col_vals[touched, None] * pivot_row
    if obj is not None and obj[col] != 0.0:
        obj -= obj[col] * pivot_row
    basis[row] = col


def _pivot_loop(tab, obj, basis, allowed, max_iter) -> int:
    """Run simplex pivots until optimal. Returns iterations, or -1 if unbounded."""
    stall = 0
    bland = False
    last_obj = obj[-1]
    rhs = tab[:, -1]
    for it in range(max_iter):
        reduced = obj[:allowed]
        if bland:
            candidates = np.flatnonzero(reduced < -_TOL)
            if len(candidates) == 0:
                return it
            col = int(candidates[0])
        else:
            col = int(np.argmin(reduced))
            if reduced[col] >= -_TOL:
                return it
        col_vals = tab[:, col]
        ratios = np.full(len(rhs), np.inf)
        positive = col_vals > _TOL
        ratios[positive] = rhs[positive] / col_vals[positive]
        row = int(np.argmin(ratios))
        if not np.isfinite(ratios[row]):
            return -1
        # Bland tie-break on leaving variable: lowest basis index.
        ties = np.flatnonzero(np.abs(ratios - ratios[row]) <= _TOL * (1.0 + abs(ratios[row])))
        if len(ties) > 1:
            row = int(ties[np.argmin(basis[ties])])
        _pivot(tab, obj, basis, row, col)
        if not bland:
            if obj[-1] > last_obj - _TOL:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True
            else:
                stall = 0
            last_obj = obj[-1]
    raise NumericalError(f"simplex exceeded {max_iter} iterations")
