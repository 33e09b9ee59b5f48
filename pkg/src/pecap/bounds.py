"""Capacity outer and inner bounds for broadcast erasure channels with feedback.

The outer bound is the permutation family of time-sharing inequalities,
evaluated exactly by dynamic programming over receiver subsets.  The inner
bound is a linear program over per-phase slot budgets {x_S} and per-queue
transmission budgets {w_(k; S -> T)}; its constraint matrix depends on the
channel only through union probabilities and partial reception
probabilities, so the symbolic structure is built once per (K, subset
ordering) and refilled per channel.  Closed-form capacity formulas for
symmetric channels and one-sidedly fair rate vectors, the geometric-tail
quantities L_S with their Monte-Carlo oracle, and the closed-form budget
schedules extracted from them live here too.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import lpsolve
from .channel import ChannelSpec, submasks

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


class BoundsError(ValueError):
    pass


class LpEngineError(RuntimeError):
    """LP solver failed numerically (distinct from plain infeasibility)."""


# ---------------------------------------------------------------------------
# subset orderings


class SubsetOrdering:
    """Strict total order on all subsets of [K], smaller cardinality first."""

    def __init__(self, K: int, sequence):
        sequence = [int(m) for m in sequence]
        if sorted(sequence) != list(range(1 << K)):
            raise BoundsError("ordering must enumerate every subset exactly once")
        for a, b in zip(sequence, sequence[1:]):
            if a.bit_count() > b.bit_count():
                raise BoundsError("ordering is not cardinality-compatible")
        self.K = K
        self.sequence = sequence
        self._pos = {m: i for i, m in enumerate(sequence)}

    @classmethod
    def default(cls, K: int) -> "SubsetOrdering":
        return cls(K, sorted(range(1 << K), key=lambda m: (m.bit_count(), incidence_value(m, K))))

    def index(self, mask: int) -> int:
        return self._pos[mask]

    def precedes(self, a: int, b: int) -> bool:
        return self._pos[a] < self._pos[b]

    @property
    def signature(self):
        return (self.K, tuple(self.sequence))


def incidence_value(mask: int, K: int) -> int:
    """Incidence vector of a subset read as a binary number, receiver 1 most significant."""
    val = 0
    for k in range(1, K + 1):
        val = (val << 1) | ((mask >> (k - 1)) & 1)
    return val


def cardinality_ordering(K: int) -> SubsetOrdering:
    return SubsetOrdering.default(K)


def random_cardinality_orderings(K: int, count: int, rng) -> list[SubsetOrdering]:
    """Distinct cardinality-compatible orderings, shuffled within each cardinality class."""
    out = []
    seen = set()
    while len(out) < count:
        seq = []
        for c in range(K + 1):
            block = [m for m in range(1 << K) if m.bit_count() == c]
            rng.shuffle(block)
            seq.extend(block)
        o = SubsetOrdering(K, seq)
        if o.signature not in seen:
            seen.add(o.signature)
            out.append(o)
    return out


def sample_direction(K: int, rng) -> np.ndarray:
    """Unit-norm direction on the nonnegative orthant of the sphere."""
    while True:
        v = np.abs(rng.standard_normal(K))
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


# ---------------------------------------------------------------------------
# outer bound


def outer_bound_max_t(spec: ChannelSpec, direction) -> float:
    """Largest t with t*direction inside the permutation outer bound.

    The binding constraint max_pi sum_j v_pi(j) / p_union(prefix_j) is found
    by dynamic programming over prefix sets, which agrees with explicit
    enumeration of all K! permutations.
    """
    v = np.asarray(direction, dtype=float)
    K = spec.K
    if v.shape != (K,) or (v < 0).any():
        raise BoundsError("direction must be a nonnegative K-vector")
    if not v.any():
        raise BoundsError("direction is identically zero")
    full = spec.full_mask
    f = np.full(1 << K, -np.inf)
    f[0] = 0.0
    for mask in range(1, 1 << K):
        pu = spec.p_union(mask)
        best = -np.inf
        for k in range(K):
            bit = 1 << k
            if not mask & bit:
                continue
            prev = f[mask ^ bit]
            if v[k] == 0.0:
                term = 0.0
            elif pu <= 0.0:
                term = np.inf
            else:
                term = v[k] / pu
            best = max(best, prev + term)
        f[mask] = best
    worst = f[full]
    if not np.isfinite(worst):
        log.warning("direction puts positive weight on a zero-probability receiver; t_outer = 0")
        return 0.0
    return 1.0 / worst


def outer_bound_sum_for_perm(spec: ChannelSpec, direction, perm) -> float:
    """sum_j v_perm(j) / p_union(prefix) for one explicit permutation (1-based)."""
    v = np.asarray(direction, dtype=float)
    acc = 0.0
    mask = 0
    for k in perm:
        mask |= 1 << (k - 1)
        pu = spec.p_union(mask)
        if v[k - 1] == 0.0:
            continue
        if pu <= 0.0:
            return np.inf
        acc += v[k - 1] / pu
    return acc


# ---------------------------------------------------------------------------
# inner bound LP structure

_KIND_CONST = 0
_KIND_PU = 1
_KIND_FP = 2


@dataclass
class _InnerStructure:
    K: int
    n_vars: int
    wcol: dict
    row_kinds: list
    rate_rows: dict
    coo_rows: np.ndarray
    coo_cols: np.ndarray
    coo_sign: np.ndarray
    coo_kind: np.ndarray
    coo_idx: np.ndarray
    fp_pairs: list
    n_rows: int
    counts: dict

    def fill(self, spec: ChannelSpec) -> sp.csr_matrix:
        pu = spec._p_union
        vals = np.ones(self.coo_kind.shape[0])
        m = self.coo_kind == _KIND_PU
        vals[m] = pu[self.coo_idx[m]]
        m = self.coo_kind == _KIND_FP
        if m.any():
            fp = np.asarray([spec.f_p(a, b) for a, b in self.fp_pairs])
            vals[m] = fp[self.coo_idx[m]]
        data = self.coo_sign * vals
        return sp.csr_matrix((data, (self.coo_rows, self.coo_cols)), shape=(self.n_rows, self.n_vars))


_STRUCTURE_CACHE: dict = {}


def _inner_structure(K: int, ordering: SubsetOrdering) -> _InnerStructure:
    if K > 8:
        raise BoundsError("inner-bound LP supported for K <= 8 (variable count grows as K 3^K); "
                          "use the symmetric or one-sided-fairness closed forms beyond that")
    key = ordering.signature
    cached = _STRUCTURE_CACHE.get(key)
    if cached is not None:
        return cached

    full = (1 << K) - 1
    n_x = 1 << K
    wcol = {}
    col = n_x
    for k in range(1, K + 1):
        rest = full & ~(1 << (k - 1))
        for S in submasks(rest):
            for T in submasks(S):
                wcol[(k, S, T)] = col
                col += 1
    n_vars = col

    rows_r, cols_c, sign_s, kind_k, idx_i = [], [], [], [], []
    fp_pairs: list = []
    fp_index: dict = {}

    def fp_id(a, b):
        key = (a, b)
        if key not in fp_index:
            fp_index[key] = len(fp_pairs)
            fp_pairs.append(key)
        return fp_index[key]

    def put(row, c, sign, kind, idx=0):
        rows_r.append(row)
        cols_c.append(c)
        sign_s.append(sign)
        kind_k.append(kind)
        idx_i.append(idx)

    row = 0
    row_kinds = []
    # total time: sum_S x_S <= 1
    for S in range(n_x):
        put(row, S, 1.0, _KIND_CONST)
    row_kinds.append(("total",))
    row += 1

    # per-phase length: x_T >= sum_S w_(k; S -> T\k)
    n_coding = 0
    for k in range(1, K + 1):
        rest = full & ~(1 << (k - 1))
        for Tp in submasks(rest):
            T = Tp | (1 << (k - 1))
            put(row, T, -1.0, _KIND_CONST)
            for S in submasks(rest):
                if S & Tp == Tp:
                    put(row, wcol[(k, S, Tp)], 1.0, _KIND_CONST)
            row_kinds.append(("coding", k, T))
            row += 1
            n_coding += 1

    # queue workload rows
    rate_rows = {}
    n_w_rows = 0
    for k in range(1, K + 1):
        rest = full & ~(1 << (k - 1))
        # empty-state queue: w_(k; {} -> {}) p_union([K]) >= R_k
        put(row, wcol[(k, 0, 0)], -1.0, _KIND_PU, full)
        rate_rows[k] = row
        row_kinds.append(("rate", k))
        row += 1
        n_w_rows += 1
        for S in submasks(rest):
            if S == 0:
                continue
            comp = full & ~S
            # cleanup: (sum_{T1 <= S} w_(k; S -> T1)) p_union(comp) >= creation
            for T1 in submasks(S):
                put(row, wcol[(k, S, T1)], -1.0, _KIND_PU, comp)
            for S1 in submasks(rest):
                if S & S1 == S:  # S subset of S1: not a creator
                    continue
                for T1 in submasks(S1):
                    if T1 & S == T1:  # T1 subset of S
                        put(row, wcol[(k, S1, T1)], 1.0, _KIND_FP, fp_id(S & ~T1, comp))
            row_kinds.append(("cleanup", k, S))
            row += 1
            n_w_rows += 1
        # causality: consumption prefix cannot pass creation prefix
        for S in submasks(rest):
            comp = full & ~S
            for T in submasks(S):
                if T == S:
                    continue
                Tk = T | (1 << (k - 1))
                put(row, wcol[(k, S, T)], 1.0, _KIND_PU, comp)
                for T1 in submasks(S):
                    if ordering.precedes(T1 | (1 << (k - 1)), Tk):
                        put(row, wcol[(k, S, T1)], 1.0, _KIND_PU, comp)
                for S1 in submasks(rest):
                    if S1 != S and ordering.precedes(S1, S) and S1 & T == T:
                        put(row, wcol[(k, S1, T)], -1.0, _KIND_FP, fp_id(S & ~T, comp))
                for S1 in submasks(rest):
                    if S & S1 == S:
                        continue
                    for T1 in submasks(S1):
                        if T1 & S == T1 and ordering.precedes(T1 | (1 << (k - 1)), Tk):
                            put(row, wcol[(k, S1, T1)], -1.0, _KIND_FP, fp_id(S & ~T1, comp))
                row_kinds.append(("causality", k, S, T))
                row += 1
                n_w_rows += 1

    counts = {
        "total": 1,
        "coding": n_coding,
        "workload": n_w_rows,
        "all": row,
    }
    st = _InnerStructure(
        K=K,
        n_vars=n_vars,
        wcol=wcol,
        row_kinds=row_kinds,
        rate_rows=rate_rows,
        coo_rows=np.asarray(rows_r, dtype=np.int64),
        coo_cols=np.asarray(cols_c, dtype=np.int64),
        coo_sign=np.asarray(sign_s, dtype=float),
        coo_kind=np.asarray(kind_k, dtype=np.int64),
        coo_idx=np.asarray(idx_i, dtype=np.int64),
        fp_pairs=fp_pairs,
        n_rows=row,
        counts=counts,
    )
    _STRUCTURE_CACHE[key] = st
    return st


def inner_constraint_counts(K: int, ordering: SubsetOrdering | None = None) -> dict:
    """Row counts of the generated LP, for auditing against 1 + K 2^(K-1) + K 3^(K-1)."""
    ordering = ordering or SubsetOrdering.default(K)
    return dict(_inner_structure(K, ordering).counts)


@dataclass
class InnerBoundVariables:
    """A feasible point of the inner-bound LP: per-phase totals and budgets."""

    K: int
    x: np.ndarray
    w: dict
    max_residual: float = 0.0
    t: float | None = None


def _rhs_for_rates(st: _InnerStructure, rates) -> np.ndarray:
    b = np.zeros(st.n_rows)
    b[0] = 1.0
    for k, row in st.rate_rows.items():
        b[row] = -float(rates[k - 1])
    return b


_HIGHS_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": FEASIBILITY_TOL,
    "dual_feasibility_tolerance": FEASIBILITY_TOL,
}


def _pick_engine(engine: str, K: int) -> str:
    if engine == "auto":
        return "own" if K <= 2 else "scipy"
    return engine


def _extract_vars(st: _InnerStructure, z: np.ndarray, A: sp.csr_matrix, b: np.ndarray) -> InnerBoundVariables:
    K = st.K
    x = np.asarray(z[: 1 << K])
    w = {key: float(z[c]) for key, c in st.wcol.items() if z[c] > 1e-13}
    resid = float((A @ z - b).max()) if st.n_rows else 0.0
    return InnerBoundVariables(K=K, x=x, w=w, max_residual=max(resid, 0.0))


def inner_bound_feasible(spec: ChannelSpec, rates, ordering: SubsetOrdering | None = None,
                         engine: str = "auto") -> InnerBoundVariables | None:
    """Feasible budgets for the given rate vector, or None if the LP is infeasible."""
    K = spec.K
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (K,) or (rates < 0).any():
        raise BoundsError("rates must be a nonnegative K-vector")
    ordering = ordering or SubsetOrdering.default(K)
    st = _inner_structure(K, ordering)
    A = st.fill(spec)
    b = _rhs_for_rates(st, rates)
    # Feasibility with a parsimony objective: minimize total scheduled time
    # (plus a whiff on the budgets) so the returned point wastes no slots.
    c = np.full(st.n_vars, 1e-6)
    c[: 1 << K] = 1.0
    eng = _pick_engine(engine, K)
    if eng == "scipy":
        res = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method="highs", options=_HIGHS_OPTIONS)
        if res.status == 2:
            return None
        if res.status != 0:
            raise LpEngineError(f"inner-bound LP solver failure: {res.message}")
        return _extract_vars(st, res.x, A, b)
    dense = A.toarray()
    rows = [(dense[i], "<=", b[i]) for i in range(st.n_rows)]
    problem = lpsolve.LpProblem(-c, rows)
    sol = lpsolve.solve_exact(problem) if eng == "exact" else lpsolve.solve(problem)
    if sol.status == "infeasible":
        return None
    if sol.status != "optimal":
        raise LpEngineError(f"inner-bound LP solver failure: {sol.status}")
    return _extract_vars(st, sol.x, A, b)


def inner_bound_max_t(spec: ChannelSpec, direction, ordering: SubsetOrdering | None = None,
                      engine: str = "auto") -> float:
    """Largest t with t*direction achievable by the inner bound (exact LP optimum)."""
    K = spec.K
    v = np.asarray(direction, dtype=float)
    if v.shape != (K,) or (v < 0).any() or not v.any():
        raise BoundsError("direction must be a nonzero nonnegative K-vector")
    ordering = ordering or SubsetOrdering.default(K)
    st = _inner_structure(K, ordering)
    A = st.fill(spec)
    b = np.zeros(st.n_rows)
    b[0] = 1.0
    # extra column for t, entering the per-session rate rows as +v_k
    tcol = np.zeros(st.n_rows)
    for k, row in st.rate_rows.items():
        tcol[row] = v[k - 1]
    A_full = sp.hstack([A, sp.csr_matrix(tcol[:, None])], format="csr")
    eng = _pick_engine(engine, K)
    if eng == "scipy":
        c = np.zeros(st.n_vars + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=A_full, b_ub=b, bounds=(0, None), method="highs", options=_HIGHS_OPTIONS)
        if res.status != 0:
            raise LpEngineError(f"inner-bound LP solver failure: {res.message}")
        return float(res.x[-1])
    dense = A_full.toarray()
    rows = [(dense[i], "<=", b[i]) for i in range(st.n_rows)]
    c = np.zeros(st.n_vars + 1)
    c[-1] = 1.0
    problem = lpsolve.LpProblem(c, rows)
    sol = lpsolve.solve_exact(problem) if eng == "exact" else lpsolve.solve(problem)
    if sol.status != "optimal":
        raise LpEngineError(f"inner-bound LP solver failure: {sol.status}")
    return float(sol.x[-1])


def deficiency(spec: ChannelSpec, direction, ordering: SubsetOrdering | None = None,
               engine: str = "auto") -> float:
    """Relative outer/inner gap along a direction, clamped at 0 for LP residue."""
    t_outer = outer_bound_max_t(spec, direction)
    if t_outer == 0.0:
        raise BoundsError("t_outer is zero; deficiency undefined")
    t_inner = inner_bound_max_t(spec, direction, ordering, engine)
    return max((t_outer - t_inner) / t_outer, 0.0)


def check_inner_variables(spec: ChannelSpec, rates, vars: InnerBoundVariables,
                          ordering: SubsetOrdering | None = None) -> float:
    """Max constraint violation of explicit (x, w) values; <= 0 means feasible."""
    ordering = ordering or SubsetOrdering.default(vars.K)
    st = _inner_structure(vars.K, ordering)
    z = np.zeros(st.n_vars)
    z[: 1 << vars.K] = vars.x
    for key, val in vars.w.items():
        z[st.wcol[key]] = val
    A = st.fill(spec)
    b = _rhs_for_rates(st, np.asarray(rates, dtype=float))
    return float((A @ z - b).max())


# ---------------------------------------------------------------------------
# closed-form capacity formulas


def symmetric_capacity_check(spec: ChannelSpec, rates) -> bool:
    """Single-inequality capacity test for symmetric channels (rates relabeled descending)."""
    if not spec.is_symmetric(tol=1e-9):
        raise BoundsError("channel is not symmetric")
    r = np.sort(np.asarray(rates, dtype=float))[::-1]
    acc = 0.0
    for k in range(1, spec.K + 1):
        pu = spec.p_union((1 << k) - 1)
        if r[k - 1] == 0.0:
            continue
        if pu <= 0.0:
            return False
        acc += r[k - 1] / pu
    return acc <= 1.0 + 1e-12


def is_one_sidedly_fair(p, rates, tol: float = 1e-12) -> bool:
    """R_i (1 - p_i) >= R_j (1 - p_j) for all i < j; expects ascending marginals."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(rates, dtype=float)
    if (np.diff(p) < -1e-12).any():
        raise BoundsError("marginals must be ascending")
    g = r * (1.0 - p)
    return bool((g[:-1] >= g[1:] - tol).all())


def osf_capacity_check(p, rates) -> bool:
    """Closed-form capacity membership for spatially independent channels and
    one-sidedly fair rates: sum_k R_k / (1 - prod_{l<=k}(1 - p_l)) <= 1."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(rates, dtype=float)
    if not is_one_sidedly_fair(p, r):
        raise BoundsError("rates are not one-sidedly fair; use the general LP bound instead")
    acc = 0.0
    miss = 1.0
    for k in range(len(p)):
        miss *= 1.0 - p[k]
        pu = 1.0 - miss
        if r[k] == 0.0:
            continue
        if pu <= 0.0:
            return False
        acc += r[k] / pu
    return acc <= 1.0 + 1e-12


def sum_rate_perf_fair(p) -> float:
    """Sum-rate capacity of a perfectly fair system on an independent channel."""
    p = np.asarray(p, dtype=float)
    if (np.diff(p) < -1e-12).any():
        raise BoundsError("marginals must be ascending")
    if (p <= 0).any():
        raise BoundsError("marginals must be positive")
    acc = 0.0
    miss = 1.0
    for pk in p:
        miss *= 1.0 - pk
        acc += 1.0 / (1.0 - miss)
    return len(p) / acc


# ---------------------------------------------------------------------------
# geometric-tail quantities and closed-form schedules


def _L_from_unions(p_union, K: int, S: int) -> float:
    full = (1 << K) - 1
    if S == full:
        raise BoundsError("L_S is undefined for the full receiver set")
    comp = full & ~S
    acc = 0.0
    base = comp.bit_count()
    for u in submasks(S):
        s1 = comp | u
        pu = p_union(s1)
        if pu <= 0.0:
            raise BoundsError("L_S requires positive union probabilities")
        sign = -1.0 if (s1.bit_count() - base) % 2 else 1.0
        acc += sign / pu
    return acc


def L_S(p, S: int) -> float:
    """Alternating-sum expectation of the overhearing surplus for independent marginals.

    Equals the expected number of extra trials by which the slowest receiver
    in S lags the fastest receiver outside S (clipped at zero).
    """
    p = np.asarray(p, dtype=float)
    K = len(p)

    def pu(mask):
        miss = 1.0
        for k in range(K):
            if mask & (1 << k):
                miss *= 1.0 - p[k]
        return 1.0 - miss

    return _L_from_unions(pu, K, S)


def L_S_spec(spec: ChannelSpec, S: int) -> float:
    """L_S evaluated with the union probabilities of an arbitrary channel spec."""
    return _L_from_unions(spec.p_union, spec.K, S)


def gamma_oracle(p, S: int, trials: int, rng) -> tuple[float, float]:
    """Monte-Carlo mean (and standard error) of the overhearing surplus.

    Draws independent geometric completion times, takes the minimum over
    receivers outside S and the maximum over S, and averages the clipped gap.
    Serves as the independent check of L_S.
    """
    if trials < 1:
        raise BoundsError("trials must be >= 1")
    p = np.asarray(p, dtype=float)
    K = len(p)
    out_idx = [k for k in range(K) if not S & (1 << k)]
    in_idx = [k for k in range(K) if S & (1 << k)]
    if not out_idx:
        raise BoundsError("S must exclude at least one receiver")
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = min(trials, 1 << 18)
    while done < trials:
        size = min(chunk, trials - done)
        draws = np.empty((size, K), dtype=np.int64)
        for k in range(K):
            draws[:, k] = rng.geometric(p[k], size=size)
        y = draws[:, out_idx].min(axis=1)
        w = draws[:, in_idx].max(axis=1) if in_idx else np.zeros(size, dtype=np.int64)
        g = np.maximum(y - w, 0)
        total += float(g.sum())
        total_sq += float((g.astype(float) ** 2).sum())
        done += size
    mean = total / trials
    var = max(total_sq / trials - mean**2, 0.0)
    return mean, math.sqrt(var / trials)


@dataclass
class ScheduleW:
    """Slot budgets for the sequential scheme: w[(k, S, T)] plus per-phase totals."""

    K: int
    w: dict
    ordering: SubsetOrdering
    x: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.x:
            self.x = self.phase_totals()

    def phase_totals(self) -> dict:
        """x_T = max_k sum_S w_(k; S -> T\\k), the parallel-session phase length."""
        full = (1 << self.K) - 1
        x = {}
        for T in range(1, full + 1):
            best = 0.0
            for k in range(1, self.K + 1):
                if not T & (1 << (k - 1)):
                    continue
                Tp = T & ~(1 << (k - 1))
                tot = sum(v for (kk, S, TT), v in self.w.items() if kk == k and TT == Tp)
                best = max(best, tot)
            x[T] = best
        return x

    def total(self) -> float:
        return sum(self.x.values())

    def as_inner_vars(self) -> InnerBoundVariables:
        xv = np.zeros(1 << self.K)
        for T, v in self.x.items():
            xv[T] = v
        return InnerBoundVariables(K=self.K, x=xv, w=dict(self.w))


def closed_form_w_schedule(rates, spec: ChannelSpec, ordering: SubsetOrdering | None = None) -> ScheduleW:
    """Budget schedule w_(k; S -> S) = R_k * L_S that attains the closed-form capacity.

    Valid for symmetric channels with descending rates, or spatially
    independent channels with ascending marginals and one-sidedly fair rates.
    All cross-state budgets w_(k; S -> T), T a proper subset of S, are zero.
    """
    K = spec.K
    r = np.asarray(rates, dtype=float)
    ordering = ordering or SubsetOrdering.default(K)
    symmetric = spec.is_symmetric(tol=1e-9)
    if symmetric:
        if (np.diff(r) > 1e-12).any():
            raise BoundsError("symmetric closed-form schedule needs descending rates")
    else:
        if not spec.is_spatially_independent(tol=1e-7):
            raise BoundsError("closed-form schedule needs a symmetric or spatially independent channel")
        p = np.asarray(spec.marginals, dtype=float)
        if (np.diff(p) < -1e-12).any():
            raise BoundsError("marginals must be ascending (relabel receivers first)")
        if not is_one_sidedly_fair(p, r):
            raise BoundsError("rates are not one-sidedly fair")
    full = (1 << K) - 1
    w = {}
    for k in range(1, K + 1):
        if r[k - 1] == 0.0:
            continue
        rest = full & ~(1 << (k - 1))
        for S in submasks(rest):
            val = r[k - 1] * _L_from_unions(spec.p_union, K, S)
            if val > 0.0:
                w[(k, S, S)] = val
    sched = ScheduleW(K=K, w=w, ordering=ordering)
    # with only same-state budgets, the max over k in T lands on min(T)
    for T, xv in sched.x.items():
        kstar = (T & -T).bit_length()
        expect = w.get((kstar, T & ~(1 << (kstar - 1)), T & ~(1 << (kstar - 1))), 0.0)
        if abs(xv - expect) > 1e-9 * max(1.0, abs(xv)):
            raise BoundsError("dominant session in a phase is not the minimum index; "
                              "rate/channel preconditions violated")
    return sched


def schedule_from_inner_vars(vars: InnerBoundVariables, ordering: SubsetOrdering) -> ScheduleW:
    """Schedule extracted from LP budgets (noise below 1e-12 dropped)."""
    w = {key: v for key, v in vars.w.items() if v > 1e-12}
    return ScheduleW(K=vars.K, w=w, ordering=ordering)


def sequential_schedule(spec: ChannelSpec, rates, ordering: SubsetOrdering | None = None,
                        margin: float = 0.03, engine: str = "auto") -> ScheduleW:
    """Budget schedule for the sequential scheme with finite-n headroom.

    Budgets sized exactly to the expected queue loads strand O(sqrt(n))
    packets about half the time, so the LP is solved for (1 + margin) times
    the target rates; the inflated budgets remain feasible for the actual
    rates and give every queue proportional slack.
    """
    rates = np.asarray(rates, dtype=float)
    ordering = ordering or SubsetOrdering.default(spec.K)
    vars = inner_bound_feasible(spec, rates * (1.0 + margin), ordering, engine)
    if vars is None:
        raise BoundsError("padded rates fall outside the inner bound; lower the margin or the rates")
    return schedule_from_inner_vars(vars, ordering)
