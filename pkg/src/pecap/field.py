"""Finite-field arithmetic and dense linear algebra over GF(q).

Supports prime fields and binary extension fields GF(2^m) with m <= 16.
Extension fields use log/antilog tables built from fixed primitive
polynomials, so a product costs two table lookups and addition is XOR.
Coding vectors are numpy int64 arrays; ``Basis`` maintains a reduced
row-echelon form incrementally, which keeps the per-insert cost at one
vector-matrix product instead of a full re-reduction.
"""

from __future__ import annotations

import numpy as np

MAX_FIELD = 1 << 16

# Primitive polynomials (with x itself primitive) for GF(2^m), m = 1..16.
# Integer encoding includes the leading x^m bit, e.g. 0x11D = x^8+x^4+x^3+x^2+1.
PRIMITIVE_POLY = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}


class FieldError(ValueError):
    pass


class UndecodableError(ValueError):
    """Raised when requested targets are outside the span of the knowledge rows."""

    def __init__(self, unreachable):
        self.unreachable = list(unreachable)
        super().__init__(f"targets not in span: {self.unreachable}")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


class GF:
    """Arithmetic in GF(q) for q prime or q = 2^m (m <= 16).

    Scalars are plain Python ints in [0, q).  Vector operations act on
    numpy int64 arrays and are the workhorse for all coding-vector math.
    """

    def __init__(self, q: int):
        if q < 2 or q > MAX_FIELD:
            raise FieldError(f"field order {q} outside supported range [2, 2^16]")
        self.q = int(q)
        if q & (q - 1) == 0:  # power of two
            self.m = q.bit_length() - 1
            self.poly = PRIMITIVE_POLY[self.m]
            self._build_tables()
            self.prime = False
        elif _is_prime(q):
            self.m = None
            self.prime = True
            self._inv = np.zeros(q, dtype=np.int64)
            for a in range(1, q):
                self._inv[a] = pow(a, q - 2, q)
        else:
            raise FieldError(f"field order {q} is neither prime nor a power of two")

    def _build_tables(self):
        q = self.q
        exp = np.zeros(2 * (q - 1), dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        x = 1
        for i in range(q - 1):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & q:
                x ^= self.poly
        if x != 1:
            raise FieldError(f"polynomial {self.poly:#x} is not primitive for GF(2^{self.m})")
        exp[q - 1 :] = exp[: q - 1]
        self._exp = exp
        self._log = log

    # -- scalar arithmetic ------------------------------------------------

    def add(self, a: int, b: int) -> int:
        return (a ^ b) if not self.prime else (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a ^ b) if not self.prime else (a - b) % self.q

    def neg(self, a: int) -> int:
        return a if not self.prime else (-a) % self.q

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self.prime:
            return (a * b) % self.q
        return int(self._exp[self._log[a] + self._log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        if self.prime:
            return int(self._inv[a])
        return int(self._exp[(self.q - 1) - self._log[a]])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    # -- vector arithmetic (numpy int64 arrays) ---------------------------

    def zeros(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=np.int64)

    def unit(self, n: int, i: int) -> np.ndarray:
        v = np.zeros(n, dtype=np.int64)
        v[i] = 1
        return v

    def vadd(self, u, v):
        if self.prime:
            return (u + v) % self.q
        return u ^ v

    def vsub(self, u, v):
        if self.prime:
            return (u - v) % self.q
        return u ^ v

    def vneg(self, u):
        if self.prime:
            return (-u) % self.q
        return u

    def vscale(self, c: int, v):
        if c == 0:
            return np.zeros_like(v)
        if c == 1:
            return v.copy()
        if self.prime:
            return (c * v) % self.q
        out = self._exp[self._log[v] + self._log[c]]
        return np.where(v == 0, 0, out)

    def vmul(self, u, v):
        """Elementwise product of two arrays."""
        if self.prime:
            return (u * v) % self.q
        out = self._exp[self._log[u] + self._log[v]]
        zero = (u == 0) | (v == 0)
        out = np.where(zero, 0, out)
        return out

    def outer(self, col, row):
        """Rank-one matrix col_i * row_j."""
        if self.prime:
            return (col[:, None] * row[None, :]) % self.q
        out = self._exp[self._log[col][:, None] + self._log[row][None, :]]
        zero = (col[:, None] == 0) | (row[None, :] == 0)
        return np.where(zero, 0, out)

    def combine(self, coeffs, rows):
        """Linear combination sum_i coeffs[i] * rows[i] of matrix rows."""
        rows = np.asarray(rows)
        if rows.shape[0] == 0:
            return np.zeros(rows.shape[1] if rows.ndim == 2 else 0, dtype=np.int64)
        if self.prime:
            return (coeffs[:, None] * rows).sum(axis=0) % self.q
        mask = coeffs != 0
        if not mask.any():
            return np.zeros(rows.shape[1], dtype=np.int64)
        sub = rows[mask]
        prod = self._exp[self._log[sub] + self._log[coeffs[mask]][:, None]]
        prod = np.where(sub == 0, 0, prod)
        return np.bitwise_xor.reduce(prod, axis=0)


def field_arith(gf: GF, a: int, b: int, op: str) -> int:
    """Dispatch helper: op in {'add', 'sub', 'mul', 'div'}."""
    if op == "add":
        return gf.add(a, b)
    if op == "sub":
        return gf.sub(a, b)
    if op == "mul":
        return gf.mul(a, b)
    if op == "div":
        return gf.div(a, b)
    raise FieldError(f"unknown op {op!r}")


class Basis:
    """Row space in reduced row-echelon form with incremental insertion.

    Rows are stored with unit pivots and cleared pivot columns, so reducing
    a vector against the basis is a single coefficient gather plus one
    linear combination.  Inserting a dependent vector leaves the basis
    unchanged and reports it.
    """

    def __init__(self, gf: GF, dim: int):
        self.gf = gf
        self.dim = int(dim)
        self.rows = np.zeros((0, dim), dtype=np.int64)
        self.pivots: list[int] = []

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def copy(self) -> "Basis":
        b = Basis(self.gf, self.dim)
        b.rows = self.rows.copy()
        b.pivots = list(self.pivots)
        return b

    def _check_dim(self, v):
        if v.shape[-1] != self.dim:
            raise FieldError(f"vector dimension {v.shape[-1]} != basis dimension {self.dim}")

    def reduce(self, v) -> np.ndarray:
        """Residual of v after elimination against the basis rows."""
        v = np.asarray(v, dtype=np.int64)
        self._check_dim(v)
        if not self.pivots:
            return v.copy()
        coeffs = v[self.pivots]
        if not coeffs.any():
            return v.copy()
        return self.gf.vsub(v, self.gf.combine(coeffs, self.rows))

    def contains(self, v) -> bool:
        return not self.reduce(v).any()

    def insert(self, v) -> bool:
        """Insert v; returns True iff the rank grew (v was outside the span)."""
        r = self.reduce(v)
        nz = np.nonzero(r)[0]
        if nz.size == 0:
            return False
        p = int(nz[0])
        row = self.gf.vscale(self.gf.inv(int(r[p])), r)
        if self.rows.shape[0]:
            col = self.rows[:, p]
            if col.any():
                self.rows = self.gf.vsub(self.rows, self.gf.outer(col, row))
        at = int(np.searchsorted(np.asarray(self.pivots, dtype=np.int64), p))
        self.rows = np.insert(self.rows, at, row, axis=0)
        self.pivots.insert(at, p)
        return True

    def insert_all(self, vectors) -> int:
        added = 0
        for v in vectors:
            if self.insert(v):
                added += 1
        return added


def basis_insert(basis: Basis, v) -> bool:
    return basis.insert(v)


def in_span(v, basis: Basis) -> bool:
    return basis.contains(v)


def solve_decode(gf: GF, knowledge_rows, targets):
    """Express each target vector over the given knowledge rows.

    Returns one coefficient row per target such that
    ``sum_i coeffs[i] * knowledge_rows[i] == target``.  Raises
    ``UndecodableError`` listing the indices of unreachable targets.
    """
    rows = [np.asarray(r, dtype=np.int64) for r in knowledge_rows]
    nrows = len(rows)
    if nrows == 0:
        dim = len(np.asarray(targets[0])) if targets else 0
        aug = Basis(gf, dim)
    else:
        dim = rows[0].shape[0]
        aug = Basis(gf, dim + nrows)
        for i, r in enumerate(rows):
            ext = np.concatenate([r, gf.zeros(nrows)])
            ext[dim + i] = 1
            aug.insert(ext)
    out = []
    bad = []
    for idx, t in enumerate(targets):
        t = np.asarray(t, dtype=np.int64)
        ext = np.concatenate([t, gf.zeros(nrows)])
        res = aug.reduce(ext)
        if res[:dim].any():
            bad.append(idx)
            out.append(None)
        else:
            out.append(gf.vneg(res[dim:]))
    if bad:
        raise UndecodableError(bad)
    return out
