"""Memoryless 1-to-K broadcast packet erasure channel.

A channel over K receivers is described by 2^K joint success
probabilities: for each subset S of receivers, the probability that a
transmitted packet is delivered to exactly the receivers in S.  Subsets
are bitmasks with bit (k-1) standing for receiver k, and the whole table
lives in a flat numpy array indexed by mask.  Derived quantities
(union-success probabilities, partial reception probabilities) and a
seeded reception sampler are provided, plus JSON persistence.
"""

from __future__ import annotations

import json

import numpy as np

NORMALIZATION_TOL = 1e-12


class ChannelError(ValueError):
    pass


def mask_of(receivers) -> int:
    """Bitmask of an iterable of 1-based receiver indices."""
    m = 0
    for k in receivers:
        m |= 1 << (k - 1)
    return m


def receivers_of(mask: int):
    """Sorted 1-based receiver indices of a bitmask."""
    out = []
    k = 1
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


def submasks(mask: int):
    """All submasks of a bitmask, including 0 and the mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class ChannelSpec:
    """Joint reception distribution of a 1-to-K broadcast erasure channel."""

    def __init__(self, K: int, probs, *, renormalize: bool = False, kind: str = "explicit", params=None):
        if not 1 <= K <= 20:
            raise ChannelError(f"K={K} outside supported range [1, 20]")
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (1 << K,):
            raise ChannelError(f"need {1 << K} probabilities for K={K}, got {probs.shape}")
        if (probs < 0).any():
            raise ChannelError("negative reception probability")
        total = probs.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            if not renormalize:
                raise ChannelError(f"probabilities sum to {total!r}, not 1 (pass renormalize=True to fix)")
            probs = probs / total
        self.K = K
        self.full_mask = (1 << K) - 1
        self.probs = probs
        self.kind = kind
        self.params = params
        self._p_union = self._union_table()
        self._cum = np.cumsum(probs)

    def _union_table(self) -> np.ndarray:
        # miss[M] = P(reception set within M); zeta transform over submasks.
        K = self.K
        miss = self.probs.copy()
        for k in range(K):
            bit = 1 << k
            for m in range(1 << K):
                if m & bit:
                    miss[m] += miss[m ^ bit]
        pu = np.empty(1 << K)
        for s in range(1 << K):
            pu[s] = 1.0 - miss[self.full_mask & ~s]
        return np.clip(pu, 0.0, 1.0)

    # -- derived probabilities --------------------------------------------

    def p_union(self, mask: int) -> float:
        """P(at least one receiver in the subset gets the packet)."""
        if mask == 0:
            return 0.0
        return float(self._p_union[mask])

    def marginal(self, k: int) -> float:
        return self.p_union(1 << (k - 1))

    @property
    def marginals(self):
        return [self.marginal(k) for k in range(1, self.K + 1)]

    def f_p(self, S: int, T: int) -> float:
        """P(everyone in S receives and nobody in T receives)."""
        if S & T:
            raise ChannelError("f_p requires disjoint subsets")
        free = self.full_mask & ~(S | T)
        acc = 0.0
        for u in submasks(free):
            acc += self.probs[S | u]
        return float(acc)

    # -- predicates ---------------------------------------------------------

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        by_card = {}
        for m in range(1 << self.K):
            c = m.bit_count()
            ref = by_card.setdefault(c, self.probs[m])
            if abs(self.probs[m] - ref) > tol:
                return False
        return True

    def is_spatially_independent(self, tol: float = 1e-9) -> bool:
        p = self.marginals
        for m in range(1 << self.K):
            expect = 1.0
            for k in range(1, self.K + 1):
                expect *= p[k - 1] if m & (1 << (k - 1)) else 1.0 - p[k - 1]
            if abs(self.probs[m] - expect) > tol:
                return False
        return True

    # -- sampling -----------------------------------------------------------

    def sampler(self, rng: np.random.Generator, buffer: int = 4096) -> "ReceptionSampler":
        return ReceptionSampler(self, rng, buffer)

    def sample_reception(self, rng: np.random.Generator) -> int:
        """One reception-set draw; i.i.d. across calls."""
        return int(np.searchsorted(self._cum, rng.random(), side="right"))

    # -- persistence ----------------------------------------------------------

    def to_json(self) -> dict:
        doc = {"schema": "pecap-channel/v1", "K": self.K, "kind": self.kind}
        if self.kind == "independent":
            doc["marginals"] = list(self.params)
        elif self.kind == "symmetric":
            doc["mass"] = list(self.params)
        else:
            doc["probs"] = {
                ",".join(str(k) for k in receivers_of(m)): float(self.probs[m])
                for m in range(1 << self.K)
                if self.probs[m] != 0.0
            }
        return doc

    @staticmethod
    def from_json(doc: dict) -> "ChannelSpec":
        K = int(doc["K"])
        kind = doc.get("kind", "explicit")
        if kind == "independent":
            return make_spatially_independent(doc["marginals"])
        if kind == "symmetric":
            return make_symmetric(K, doc["mass"])
        probs = np.zeros(1 << K)
        for key, value in doc["probs"].items():
            receivers = [int(tok) for tok in key.split(",") if tok]
            probs[mask_of(receivers)] = float(value)
        return ChannelSpec(K, probs, renormalize=doc.get("renormalize", False))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @staticmethod
    def load(path) -> "ChannelSpec":
        with open(path) as fh:
            return ChannelSpec.from_json(json.load(fh))


class ReceptionSampler:
    """Buffered i.i.d. reception-set draws from a channel spec."""

    def __init__(self, spec: ChannelSpec, rng: np.random.Generator, buffer: int = 4096):
        self.spec = spec
        self.rng = rng
        self.buffer = buffer
        self._batch = None
        self._pos = 0

    def draw(self) -> int:
        if self._batch is None or self._pos >= len(self._batch):
            self._batch = np.searchsorted(self.spec._cum, self.rng.random(self.buffer), side="right")
            self._pos = 0
        m = int(self._batch[self._pos])
        self._pos += 1
        return m


def make_spatially_independent(marginals) -> ChannelSpec:
    """Channel where receivers succeed independently with the given marginals."""
    p = [float(x) for x in marginals]
    K = len(p)
    for x in p:
        if not 0.0 <= x <= 1.0:
            raise ChannelError(f"marginal {x} outside [0, 1]")
    probs = np.ones(1 << K)
    for k in range(K):
        bit = 1 << k
        for m in range(1 << K):
            probs[m] *= p[k] if m & bit else 1.0 - p[k]
    return ChannelSpec(K, probs, renormalize=True, kind="independent", params=p)


def make_symmetric(K: int, mass) -> ChannelSpec:
    """Channel whose reception probability depends only on |S|.

    ``mass[c]`` is the probability assigned to EACH subset of cardinality c,
    so sum_c C(K, c) * mass[c] must equal 1.
    """
    mass = [float(x) for x in mass]
    if len(mass) != K + 1:
        raise ChannelError(f"need K+1={K + 1} per-cardinality masses, got {len(mass)}")
    probs = np.empty(1 << K)
    for m in range(1 << K):
        probs[m] = mass[m.bit_count()]
    return ChannelSpec(K, probs, kind="symmetric", params=mass)


def permute_receivers(spec: ChannelSpec, perm) -> ChannelSpec:
    """Relabeled channel: new receiver i is old receiver perm[i-1].

    ``perm`` is a 1-based permutation of [K]; the returned spec satisfies
    new.p_union({i}) == old.p_union({perm[i-1]}).
    """
    K = spec.K
    probs = np.zeros(1 << K)
    for m in range(1 << K):
        old = 0
        for i in range(K):
            if m & (1 << i):
                old |= 1 << (perm[i] - 1)
        probs[m] = spec.probs[old]
    return ChannelSpec(K, probs, renormalize=True, kind="explicit", params=None)
