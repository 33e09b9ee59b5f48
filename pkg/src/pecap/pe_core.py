"""Packet-evolution engine for feedback network coding on broadcast erasure channels.

Every information packet carries a coding vector and an overhearing set.
Each slot the source picks a mixing set T, one eligible target packet per
session in T, and transmits a random linear combination of the targets'
vectors; the same coded packet repeats until feedback shows some target's
overhearing set changed, at which point the target is rewritten in place
(set and vector together).  Receiver knowledge spaces, the non-interference
and decodability span checks, and the deterministic coefficient
construction for small fields all live here.  Transmission policies
(which T, which targets) are supplied by the schemes module or by the
randomized micro-run driver at the bottom.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec
from .field import GF, Basis

DEFAULT_Q = 1 << 16


class PeError(ValueError):
    pass


@dataclass
class PacketState:
    """One information packet: owner session, global coordinate, set, vector."""

    owner: int
    index: int
    coord: int
    overhearing: int = 0
    vec: np.ndarray | None = None

    def done(self) -> bool:
        return bool(self.overhearing & (1 << (self.owner - 1)))


@dataclass
class SlotResult:
    t: int
    T: int
    s_rx: int
    fired: list  # (packet, old_overhearing)
    changed: bool


@dataclass
class SimulationResult:
    scheme: str
    n: int
    slots_used: int
    decoded: list
    decode_mode: str
    completed: bool
    seed: int | None = None
    counts: list = field(default_factory=list)
    lost_rate_fraction: list = field(default_factory=list)
    shortfall: dict | None = None
    phase_log: list = field(default_factory=list)
    state_slots: dict | None = None
    packet_state_time: dict | None = None
    non_interference_ok: bool | None = None
    span_check_failures: int | None = None
    trace: list | None = None

    @property
    def all_decoded(self) -> bool:
        return all(self.decoded)


class ReceiverState:
    """Accumulated knowledge space of one destination."""

    def __init__(self, k: int, gf: GF, dim: int, message_coords):
        self.k = k
        self.gf = gf
        self.dim = dim
        self.knowledge = Basis(gf, dim)
        self.message_coords = list(message_coords)

    def observe(self, v_tx, received: bool):
        if received and v_tx is not None:
            self.knowledge.insert(v_tx)

    def decode_all(self) -> bool:
        """True iff every own message coordinate is recoverable from the knowledge space."""
        for c in self.message_coords:
            if not self.knowledge.contains(self.gf.unit(self.dim, c)):
                return False
        return True


def build_tx_vector(gf: GF, targets, coeffs) -> np.ndarray:
    """Coding vector sum_k coeffs[k] * v(target_k)."""
    if len(targets) != len(coeffs):
        raise PeError("one coefficient per target required")
    rows = np.vstack([p.vec for p in targets])
    return gf.combine(np.asarray(coeffs, dtype=np.int64), rows)


class PeSimulation:
    """Source-side state plus (optionally) receiver knowledge tracking.

    ``track_coding=False`` drops the coding vectors and runs the identical
    control flow on overhearing sets alone; the random-coefficient draws
    are still consumed so a run is reproducible across modes.
    """

    def __init__(self, spec: ChannelSpec, counts, q: int = DEFAULT_Q, rng=None, *,
                 track_coding: bool = True, track_receivers: bool = False,
                 accounting: bool = False, trace: bool = False,
                 coeff_mode: str = "random"):
        counts = [int(c) for c in counts]
        if len(counts) != spec.K or any(c < 0 for c in counts):
            raise PeError("need one nonnegative packet count per session")
        if sum(counts) == 0:
            raise PeError("zero total packets")
        if track_receivers and not track_coding:
            raise PeError("receiver tracking requires coding vectors")
        if coeff_mode not in ("random", "deterministic"):
            raise PeError(f"unknown coeff_mode {coeff_mode!r}")
        if coeff_mode == "deterministic" and not track_receivers:
            raise PeError("deterministic coefficients need receiver knowledge")
        self.spec = spec
        self.K = spec.K
        self.counts = counts
        self.q = q
        self.rng = rng if rng is not None else np.random.default_rng()
        self.track_coding = track_coding
        self.track_receivers = track_receivers
        self.coeff_mode = coeff_mode
        self.dim = sum(counts)
        self.gf = GF(q) if track_coding else None
        self.packets: list[PacketState] = []
        self.sessions: list[list[PacketState]] = [[] for _ in range(self.K)]
        coord = 0
        for k in range(1, self.K + 1):
            for j in range(counts[k - 1]):
                vec = self.gf.unit(self.dim, coord) if track_coding else None
                p = PacketState(owner=k, index=j, coord=coord, overhearing=0, vec=vec)
                self.packets.append(p)
                self.sessions[k - 1].append(p)
                coord += 1
        self.receivers: list[ReceiverState] | None = None
        if track_receivers:
            self.receivers = []
            offset = 0
            for k in range(1, self.K + 1):
                coords = range(offset, offset + counts[k - 1])
                self.receivers.append(ReceiverState(k, self.gf, self.dim, coords))
                offset += counts[k - 1]
        self.sampler = spec.sampler(self.rng)
        self.t = 0
        self.f_change = True
        self.current = None  # (T, ordered targets, coeffs, v_tx)
        self.state_slots: dict = {}
        self.accounting = accounting
        self.packet_state_time: dict = {} if accounting else None
        self.trace = [] if trace else None

    @classmethod
    def from_rates(cls, spec: ChannelSpec, n: int, rates, q: int = DEFAULT_Q, rng=None, **kw):
        """Counts n*R_k, which must be integral (callers round beforehand)."""
        counts = []
        for r in rates:
            c = n * float(r)
            if abs(c - round(c)) > 1e-9 * max(1.0, abs(c)):
                raise PeError(f"n*R = {c} is not integral; round the rates first")
            counts.append(int(round(c)))
        return cls(spec, counts, q, rng, **kw)

    # -- selection ----------------------------------------------------------

    def eligible_targets(self, T: int) -> dict:
        """Per-session candidate lists: packets with overhearing + own bit covering T."""
        if T == 0:
            raise PeError("mixing set must be non-empty")
        out = {}
        for k in range(1, self.K + 1):
            if not T & (1 << (k - 1)):
                continue
            bit = 1 << (k - 1)
            out[k] = [p for p in self.sessions[k - 1] if (p.overhearing | bit) & T == T]
        return out

    def select(self, T: int, targets: dict, coeffs=None):
        """Fix the mixing set, target packets and coefficients for coming slots.

        ``targets`` may cover a subset of T (exhausted sessions simply do not
        contribute, the dummy-packet device); every target must be eligible
        for the full T.
        """
        if T == 0 or T > self.spec.full_mask:
            raise PeError("bad mixing set")
        if not targets:
            raise PeError("need at least one target packet")
        ordered = []
        for k in sorted(targets):
            if not T & (1 << (k - 1)):
                raise PeError(f"target session {k} outside mixing set")
            p = targets[k]
            if p.owner != k:
                raise PeError("target listed under the wrong session")
            if (p.overhearing | (1 << (k - 1))) & T != T:
                raise PeError(f"packet (session {k}, index {p.index}) not eligible for this mixing set")
            ordered.append(p)
        if coeffs is None:
            if self.coeff_mode == "deterministic":
                coeffs = self.deterministic_coeffs(T, ordered)
            else:
                coeffs = [int(c) for c in self.rng.integers(0, self.q, size=len(ordered))]
        elif len(coeffs) != len(ordered):
            raise PeError("one coefficient per target required")
        v_tx = build_tx_vector(self.gf, ordered, coeffs) if self.track_coding else None
        self.current = (T, ordered, list(coeffs), v_tx)
        self.f_change = False

    def invalidate_selection(self):
        self.current = None
        self.f_change = True

    # -- per-slot dynamics -----------------------------------------------------

    def transmit(self, s_rx: int | None = None) -> SlotResult:
        if self.current is None:
            raise PeError("no current selection; call select() first")
        T, ordered, coeffs, v_tx = self.current
        self.t += 1
        if s_rx is None:
            s_rx = self.sampler.draw()
        for p in ordered:
            key = (p.owner, p.overhearing)
            self.state_slots[key] = self.state_slots.get(key, 0) + 1
            if self.accounting:
                pk = (p.coord, p.overhearing)
                self.packet_state_time[pk] = self.packet_state_time.get(pk, 0) + 1
        if self.receivers is not None:
            for k in range(1, self.K + 1):
                if s_rx & (1 << (k - 1)):
                    self.receivers[k - 1].observe(v_tx, True)
        fired = []
        for p in ordered:  # ascending owner; per-target rule, order immaterial
            if s_rx & ~p.overhearing:
                old = p.overhearing
                p.overhearing = (T & old) | s_rx
                if (p.overhearing | (1 << (p.owner - 1))) != (T | s_rx):
                    raise PeError("post-update identity violated; selection was not eligible")
                if self.track_coding:
                    p.vec = v_tx
                fired.append((p, old))
        changed = bool(fired)
        self.f_change = changed
        if self.trace is not None:
            self.trace.append((self.t, T, s_rx, tuple((p.owner, p.coord) for p in ordered)))
        return SlotResult(t=self.t, T=T, s_rx=s_rx, fired=fired, changed=changed)

    def tick_idle(self):
        """Consume one slot with a dummy (all-zero) transmission."""
        self.t += 1

    def update(self, T: int, targets: dict, s_rx: int) -> bool:
        """Apply the overhearing-set/vector rewrite rule directly (test hook)."""
        self.select(T, targets, coeffs=[1] * len(targets))
        return self.transmit(s_rx=s_rx).changed

    # -- coefficients -------------------------------------------------------------

    def deterministic_coeffs(self, T: int, ordered) -> list:
        """Mixing coefficients that provably preserve decodability on GF(q), q > K.

        For each live target whose current vector is outside
        span(knowledge, other remaining vectors), the combination must stay
        outside that span; a uniformly random tuple fails with probability
        at most K/q < 1, so a deterministic seeded search terminates.
        """
        if self.q <= self.K:
            raise PeError(f"field of order {self.q} too small for {self.K} sessions (need q > K)")
        constraints = []
        for p in ordered:
            if p.done():
                continue
            k = p.owner
            base = self.receivers[k - 1].knowledge.copy()
            for other in self.sessions[k - 1]:
                if other is not p and not other.done():
                    base.insert(other.vec)
            if not base.contains(p.vec):
                constraints.append(base)
        if not constraints:
            return [1] * len(ordered)
        rows = np.vstack([p.vec for p in ordered])
        local = np.random.default_rng(0x5EED ^ self.t)
        cand = np.ones(len(ordered), dtype=np.int64)
        for attempt in range(64 * self.q):
            v = self.gf.combine(cand, rows)
            if all(not b.contains(v) for b in constraints):
                return [int(c) for c in cand]
            cand = local.integers(0, self.q, size=len(ordered)).astype(np.int64)
        raise PeError("coefficient search failed; field too small or state inconsistent")

    # -- inspection ----------------------------------------------------------------

    def all_done(self) -> bool:
        return all(p.done() for p in self.packets)

    def structural_decoded(self) -> list:
        return [all(p.done() for p in self.sessions[k]) for k in range(self.K)]

    def remaining_space(self, k: int) -> Basis:
        """Span of current vectors of session-k packets not yet received by d_k."""
        if not self.track_coding:
            raise PeError("remaining space needs coding vectors")
        b = Basis(self.gf, self.dim)
        for p in self.sessions[k - 1]:
            if not p.done():
                b.insert(p.vec)
        return b

    def _span_zm(self, k: int) -> Basis:
        b = self.receivers[k - 1].knowledge.copy()
        for c in self.receivers[k - 1].message_coords:
            b.insert(self.gf.unit(self.dim, c))
        return b

    def check_non_interference(self) -> bool:
        """Every packet's vector is non-interfering for everyone in its set (plus owner)."""
        if self.receivers is None:
            raise PeError("span checks need receiver tracking")
        spans = [self._span_zm(k) for k in range(1, self.K + 1)]
        for p in self.packets:
            audience = p.overhearing | (1 << (p.owner - 1))
            for k in range(1, self.K + 1):
                if audience & (1 << (k - 1)) and not spans[k - 1].contains(p.vec):
                    return False
        return True

    def check_span_decodability(self) -> bool:
        """span(knowledge, remaining) == span(knowledge, messages) for every receiver."""
        if self.receivers is None:
            raise PeError("span checks need receiver tracking")
        for k in range(1, self.K + 1):
            zm = self._span_zm(k)
            zr = self.receivers[k - 1].knowledge.copy()
            for p in self.sessions[k - 1]:
                if not p.done():
                    if not zm.contains(p.vec):
                        return False
                    zr.insert(p.vec)
            if zr.rank != zm.rank:
                return False
        return True

    def decode_all(self, k: int) -> bool:
        if self.receivers is None:
            raise PeError("decoding needs receiver tracking")
        return self.receivers[k - 1].decode_all()

    def decoded(self) -> list:
        if self.receivers is not None:
            return [self.decode_all(k) for k in range(1, self.K + 1)]
        return self.structural_decoded()

    # -- generic driver ---------------------------------------------------------------

    def run(self, policy, n: int, stop_when_done: bool = True):
        """Drive the scheme: ask the policy for a selection whenever one is needed."""
        while self.t < n:
            if self.f_change or self.current is None:
                sel = policy(self)
                if sel is None:
                    break
                T, targets = sel[0], sel[1]
                coeffs = sel[2] if len(sel) > 2 else None
                self.select(T, targets, coeffs)
            self.transmit()
            if stop_when_done and self.all_done():
                break
        return self.t


def random_pe_policy(rng):
    """Uniformly random mixing set (among those with eligible packets) and targets."""

    def policy(sim: PeSimulation):
        if sim.all_done():
            return None
        candidates = []
        for T in range(1, 1 << sim.K):
            el = sim.eligible_targets(T)
            if all(el.get(k) for k in el):
                candidates.append((T, el))
        live = [(T, el) for T, el in candidates
                if any(not p.done() for lst in el.values() for p in lst)]
        pool = live or candidates
        T, el = pool[rng.integers(0, len(pool))]
        targets = {}
        for k, lst in el.items():
            pending = [p for p in lst if not p.done()]
            pick = pending or lst
            targets[k] = pick[rng.integers(0, len(pick))]
        return T, targets

    return policy


def random_pe_run(spec: ChannelSpec, counts, n: int, q: int = DEFAULT_Q, seed: int = 0, *,
                  deterministic: bool = False, check_every_slot: bool = True) -> SimulationResult:
    """Randomized micro-run with per-slot non-interference and decodability span checks."""
    rng = np.random.default_rng(seed)
    sim = PeSimulation(
        spec, counts, q, rng, track_coding=True, track_receivers=True,
        coeff_mode="deterministic" if deterministic else "random",
    )
    policy = random_pe_policy(rng)
    non_interference_ok = True
    span_check_failures = 0
    span_check_bad = False
    while sim.t < n and not sim.all_done():
        if sim.f_change or sim.current is None:
            sel = policy(sim)
            if sel is None:
                break
            sim.select(*sel)
        sim.transmit()
        if check_every_slot:
            non_interference_ok = non_interference_ok and sim.check_non_interference()
            if not span_check_bad and not sim.check_span_decodability():
                span_check_bad = True
                span_check_failures += 1
    return SimulationResult(
        scheme="random-pe",
        n=n,
        slots_used=sim.t,
        decoded=sim.decoded(),
        decode_mode="exact",
        completed=sim.all_done(),
        seed=seed,
        counts=list(counts),
        non_interference_ok=non_interference_ok,
        span_check_failures=span_check_failures,
        state_slots=dict(sim.state_slots),
    )
