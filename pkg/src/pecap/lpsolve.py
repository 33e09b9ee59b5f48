"""Dense two-phase simplex solver for small linear programs.

Maximizes c.x subject to mixed <=, >=, == rows and per-variable lower
bounds (default 0).  Phase 1 drives artificial variables to zero, phase 2
optimizes the real objective.  Pivoting is Dantzig's rule with an
automatic switch to Bland's rule after a run of degenerate pivots, so the
solver is deterministic and cycle-free.  An exact Fraction-based variant
is provided for boundary disputes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DEFAULT_TOL = 1e-9
STALL_THRESHOLD = 40


@dataclass
class LpProblem:
    """maximize objective . x  s.t. rows; variables bounded below."""

    objective: np.ndarray
    rows: list  # (coeffs, sense in {'<=', '>=', '=='}, rhs)
    lower_bounds: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        norm = []
        for coeffs, sense, rhs in self.rows:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (n,):
                raise ValueError("constraint dimension mismatch")
            if sense not in ("<=", ">=", "=="):
                raise ValueError(f"bad sense {sense!r}")
            norm.append((coeffs, sense, float(rhs)))
        self.rows = norm
        if self.lower_bounds is None:
            self.lower_bounds = np.zeros(n)
        else:
            self.lower_bounds = np.asarray(self.lower_bounds, dtype=float)

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | numerical-failure
    x: np.ndarray | None = None
    objective: float | None = None
    dual_bound: float | None = None
    iterations: int = 0
    duals: np.ndarray | None = field(default=None, repr=False)


def _pivot(tableau, obj, basis, row, col):
    piv = tableau[row, col]
    tableau[row] /= piv
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    obj -= obj[col] * tableau[row]
    basis[row] = col


def _run_simplex(tableau, obj, basis, allowed, tol, max_iter):
    """Minimize obj over the tableau in place. Returns (status, iterations)."""
    iters = 0
    stall = 0
    m = tableau.shape[0]
    while True:
        if iters > max_iter:
            return "numerical-failure", iters
        use_bland = stall >= STALL_THRESHOLD
        red = obj[:-1]
        if use_bland:
            enter = -1
            for j in np.nonzero(allowed)[0]:
                if red[j] < -tol:
                    enter = int(j)
                    break
        else:
            masked = np.where(allowed, red, np.inf)
            enter = int(np.argmin(masked))
            if masked[enter] >= -tol:
                enter = -1
        if enter < 0:
            return "optimal", iters
        colvals = tableau[:, enter]
        best_ratio = None
        leave = -1
        for i in range(m):
            if colvals[i] > tol:
                ratio = tableau[i, -1] / colvals[i]
                if best_ratio is None or ratio < best_ratio - tol or (
                    abs(ratio - best_ratio) <= tol and basis[i] < basis[leave]
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return "unbounded", iters
        stall = stall + 1 if best_ratio <= tol else 0
        _pivot(tableau, obj, basis, leave, enter)
        iters += 1


def solve(problem: LpProblem, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> LpSolution:
    """Two-phase simplex; deterministic given the problem."""
    n = problem.n_vars
    lb = problem.lower_bounds
    m = len(problem.rows)
    if max_iter is None:
        max_iter = 200 * (m + n) + 2000

    # Shift to y = x - lb >= 0, normalize rhs >= 0.
    rows = []
    for coeffs, sense, rhs in problem.rows:
        r = rhs - coeffs @ lb
        if r < 0:
            coeffs, r = -coeffs, -r
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        rows.append((coeffs, sense, r))

    n_slack = sum(1 for _, s, _ in rows if s in ("<=", ">="))
    n_art = sum(1 for _, s, _ in rows if s in (">=", "=="))
    total = n + n_slack + n_art
    tableau = np.zeros((m, total + 1))
    basis = [-1] * m
    art_cols = []
    s_at = n
    a_at = n + n_slack
    row_identity = [-1] * m  # the column that starts as e_i; exposes B^{-1} later
    for i, (coeffs, sense, r) in enumerate(rows):
        tableau[i, :n] = coeffs
        tableau[i, -1] = r
        if sense == "<=":
            tableau[i, s_at] = 1.0
            basis[i] = s_at
            row_identity[i] = s_at
            s_at += 1
        elif sense == ">=":
            tableau[i, s_at] = -1.0
            s_at += 1
            tableau[i, a_at] = 1.0
            basis[i] = a_at
            row_identity[i] = a_at
            art_cols.append(a_at)
            a_at += 1
        else:
            tableau[i, a_at] = 1.0
            basis[i] = a_at
            row_identity[i] = a_at
            art_cols.append(a_at)
            a_at += 1

    art_cols = np.asarray(art_cols, dtype=int)
    allowed = np.ones(total, dtype=bool)

    iterations = 0
    if n_art:
        artset = set(art_cols.tolist())
        obj1 = np.zeros(total + 1)
        obj1[art_cols] = 1.0
        for i in range(m):
            if basis[i] in artset:
                obj1 -= tableau[i]
        status, it1 = _run_simplex(tableau, obj1, basis, allowed, tol, max_iter)
        iterations += it1
        if status != "optimal":
            return LpSolution(status="numerical-failure", iterations=iterations)
        if -obj1[-1] > 1e-7:
            return LpSolution(status="infeasible", iterations=iterations)
        # pivot leftover artificials out where possible; rows that cannot are
        # redundant and stay frozen at zero
        for i in range(m):
            if basis[i] in artset:
                cand = np.nonzero(np.abs(tableau[i, : n + n_slack]) > tol)[0]
                if cand.size:
                    obj_dummy = np.zeros(total + 1)
                    _pivot(tableau, obj_dummy, basis, i, int(cand[0]))
        allowed[art_cols] = False

    obj2 = np.zeros(total + 1)
    obj2[:n] = -problem.objective
    for i in range(m):
        if abs(obj2[basis[i]]) > 0:
            obj2 -= obj2[basis[i]] * tableau[i]
    status, it2 = _run_simplex(tableau, obj2, basis, allowed, tol, max_iter)
    iterations += it2
    if status != "optimal":
        return LpSolution(status=status, iterations=iterations)

    y = np.zeros(total)
    for i in range(m):
        if 0 <= basis[i] < total:
            y[basis[i]] = tableau[i, -1]
    x = y[:n] + lb
    objective = float(problem.objective @ x)

    # Dual certificate: the objective-row entries over the columns that
    # started as the identity are the reduced costs -y_i of the internal
    # minimized form, so reading them against the rhs recovers the optimum
    # up to the lower-bound shift.
    duals = np.asarray([obj2[row_identity[i]] for i in range(m)])
    rhs_vec = np.asarray([r for _, _, r in rows])
    dual_bound = float(duals @ rhs_vec) + float(problem.objective @ lb)
    return LpSolution(
        status="optimal", x=x, objective=objective, dual_bound=dual_bound, iterations=iterations, duals=duals
    )


# -- exact rational variant -------------------------------------------------


def solve_exact(problem: LpProblem, max_iter: int = 20000) -> LpSolution:
    """Fraction-arithmetic simplex with Bland's rule (slow; tiny LPs only)."""
    n = problem.n_vars
    lb = [Fraction(x).limit_denominator(10**12) for x in problem.lower_bounds]
    rows = []
    for coeffs, sense, rhs in problem.rows:
        fc = [Fraction(v).limit_denominator(10**12) for v in coeffs]
        fr = Fraction(rhs).limit_denominator(10**12) - sum(c * l for c, l in zip(fc, lb))
        if fr < 0:
            fc = [-c for c in fc]
            fr = -fr
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        rows.append((fc, sense, fr))
    m = len(rows)
    n_slack = sum(1 for _, s, _ in rows if s in ("<=", ">="))
    n_art = sum(1 for _, s, _ in rows if s in (">=", "=="))
    total = n + n_slack + n_art
    T = [[Fraction(0)] * (total + 1) for _ in range(m)]
    basis = [-1] * m
    art = []
    s_at, a_at = n, n + n_slack
    for i, (fc, sense, fr) in enumerate(rows):
        for j, v in enumerate(fc):
            T[i][j] = v
        T[i][-1] = fr
        if sense == "<=":
            T[i][s_at] = Fraction(1)
            basis[i] = s_at
            s_at += 1
        elif sense == ">=":
            T[i][s_at] = Fraction(-1)
            s_at += 1
            T[i][a_at] = Fraction(1)
            basis[i] = a_at
            art.append(a_at)
            a_at += 1
        else:
            T[i][a_at] = Fraction(1)
            basis[i] = a_at
            art.append(a_at)
            a_at += 1

    def pivot(obj, r, c):
        piv = T[r][c]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][c] != 0:
                f = T[i][c]
                T[i] = [a - f * b for a, b in zip(T[i], T[r])]
        if obj[c] != 0:
            f = obj[c]
            for j in range(total + 1):
                obj[j] -= f * T[r][j]
        basis[r] = c

    def run(obj, blocked):
        for _ in range(max_iter):
            enter = -1
            for j in range(total):
                if j not in blocked and obj[j] < 0:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            leave, best = -1, None
            for i in range(m):
                if T[i][enter] > 0:
                    ratio = T[i][-1] / T[i][enter]
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best, leave = ratio, i
            if leave < 0:
                return "unbounded"
            pivot(obj, leave, enter)
        return "numerical-failure"

    blocked: set[int] = set()
    if art:
        obj1 = [Fraction(0)] * (total + 1)
        for c in art:
            obj1[c] = Fraction(1)
        for i in range(m):
            if basis[i] in art:
                obj1 = [a - b for a, b in zip(obj1, T[i])]
        status = run(obj1, blocked)
        if status != "optimal":
            return LpSolution(status="numerical-failure")
        if -obj1[-1] > 0:
            return LpSolution(status="infeasible")
        for i in range(m):
            if basis[i] in art:
                for j in range(n + n_slack):
                    if T[i][j] != 0:
                        pivot([Fraction(0)] * (total + 1), i, j)
                        break
        blocked = set(art)

    cmax = [Fraction(v).limit_denominator(10**12) for v in problem.objective]
    obj2 = [Fraction(0)] * (total + 1)
    for j in range(n):
        obj2[j] = -cmax[j]
    for i in range(m):
        if obj2[basis[i]] != 0:
            f = obj2[basis[i]]
            for j in range(total + 1):
                obj2[j] -= f * T[i][j]
    status = run(obj2, blocked)
    if status != "optimal":
        return LpSolution(status=status)
    xs = [Fraction(0)] * total
    for i in range(m):
        if basis[i] >= 0:
            xs[basis[i]] = T[i][-1]
    x = np.asarray([float(xs[j] + lb[j]) for j in range(n)])
    return LpSolution(status="optimal", x=x, objective=float(problem.objective @ x))
