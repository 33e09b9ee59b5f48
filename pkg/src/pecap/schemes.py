"""Concrete transmission policies built on the packet-evolution engine.

Implements the two-phase retransmit-then-mix baseline, the ten-sub-phase
capacity-achieving scheme for three receivers, and the sequential
phase-per-subset scheme for general K driven by an explicit budget
schedule.  Queues are FIFO per (session, overhearing-set) pair; a held
packet is replaced by the next in line as soon as feedback shows its set
changed.  When a partner queue empties early the remaining sessions keep
the same mixing set and simply transmit without the missing contribution
(the dummy-packet device), which preserves the queue accounting.
"""

from __future__ import annotations

from collections import deque
from functools import cmp_to_key

import numpy as np

from . import bounds
from .bounds import ScheduleW, SubsetOrdering
from .channel import ChannelSpec, permute_receivers
from .pe_core import DEFAULT_Q, PeError, PeSimulation, SimulationResult


class SchemeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# dominance ordering (three receivers)


class DominanceOrder:
    """Receiver relabeling: perm[0] dominates perm[1] dominates perm[2]."""

    def __init__(self, perm):
        self.perm = tuple(perm)

    def __repr__(self):
        return f"DominanceOrder(perm={self.perm})"


def dominance_gap(spec: ChannelSpec, k: int) -> float:
    """1/p_union(all but k) - 1/p_union(all): receiver k's claim on shared slots."""
    full = spec.full_mask
    return 1.0 / spec.p_union(full & ~(1 << (k - 1))) - 1.0 / spec.p_union(full)


def dominates(rates, spec: ChannelSpec, i: int, k: int, tol: float = 1e-12) -> bool:
    return rates[i - 1] * dominance_gap(spec, k) >= rates[k - 1] * dominance_gap(spec, i) - tol


def dominance_order(rates, spec: ChannelSpec) -> DominanceOrder:
    """Relabeling of three receivers consistent with pairwise dominance.

    Ties (for example on symmetric channels) break toward the lower index.
    """
    if spec.K != 3:
        raise SchemeError("dominance ordering is defined for K=3")
    if min(spec.marginals) <= 0.0:
        raise SchemeError("dominance ordering needs positive marginals")
    rates = [float(r) for r in rates]

    def cmp(a, b):
        ab = dominates(rates, spec, a, b)
        ba = dominates(rates, spec, b, a)
        if ab and not ba:
            return -1
        if ba and not ab:
            return 1
        return 0

    perm = sorted((1, 2, 3), key=cmp_to_key(cmp))
    return DominanceOrder(perm)


# ---------------------------------------------------------------------------
# shared helpers


def backoff_rates(spec: ChannelSpec, direction, epsilon: float = 0.05) -> np.ndarray:
    """Rate point (1 - epsilon) of the way to the outer-bound boundary."""
    v = np.asarray(direction, dtype=float)
    t = bounds.outer_bound_max_t(spec, v)
    return (1.0 - epsilon) * t * v


def _counts_and_loss(n: int, rates):
    counts, lost = [], []
    for r in rates:
        exact = n * float(r)
        c = int(exact + 1e-9)
        counts.append(c)
        lost.append(0.0 if exact <= 0 else (exact - c) / exact)
    return counts, lost


def _unpermute_mask(mask: int, perm) -> int:
    out = 0
    for i, orig in enumerate(perm):
        if mask & (1 << i):
            out |= 1 << (orig - 1)
    return out


class _QueueRunner:
    """FIFO queues per (session, overhearing set) with held-packet bookkeeping."""

    def __init__(self, sim: PeSimulation):
        self.sim = sim
        self.queues: dict = {}
        for k in range(1, sim.K + 1):
            q = deque(sim.sessions[k - 1])
            if q:
                self.queues[(k, 0)] = q
        self.held: dict = {}

    def queue(self, key) -> deque:
        return self.queues.setdefault(key, deque())

    def side_exhausted(self, k, key) -> bool:
        return self.held.get(k) is None and not self.queue(key)

    def park_held(self):
        """Return held packets to the front of their state queue (phase boundary)."""
        for k, p in list(self.held.items()):
            if p is not None:
                self.queue((k, p.overhearing)).appendleft(p)
        self.held = {}
        self.sim.invalidate_selection()

    def absorb_fired(self, fired):
        for p, _old in fired:
            if self.held.get(p.owner) is p:
                self.held[p.owner] = None
            if not p.done():
                self.queue((p.owner, p.overhearing)).append(p)

    def run_phase_pending(self, k: int, n: int) -> str:
        """Send session k's undelivered packets solo until each reaches d_k."""
        sim = self.sim
        kbit = 1 << (k - 1)
        pending = deque(p for p in sim.sessions[k - 1] if not p.done())
        self.queues = {key: q for key, q in self.queues.items() if key[0] != k}
        while pending:
            p = pending[0]
            if p.done():
                pending.popleft()
                continue
            if sim.t >= n:
                return "out_of_slots"
            if sim.f_change or sim.current is None:
                sim.select(kbit, {k: p})
            sim.transmit()
        return "done"

    def run_phase(self, T: int, sides, stop_keys, n: int) -> str:
        """Transmit with mixing set T until every stop side drains (or slots run out)."""
        sim = self.sim
        self.park_held()
        while True:
            for k, key in sides:
                if self.held.get(k) is None and self.queue(key):
                    self.held[k] = self.queue(key).popleft()
                    sim.invalidate_selection()
            if all(self.side_exhausted(k, key) for k, key in stop_keys):
                return "done"
            targets = {k: self.held[k] for k, _ in sides if self.held.get(k) is not None}
            if not targets:
                return "done"
            if sim.t >= n:
                return "out_of_slots"
            if sim.f_change or sim.current is None:
                sim.select(T, targets)
            res = sim.transmit()
            if res.fired:
                self.absorb_fired(res.fired)


# ---------------------------------------------------------------------------
# two-phase baseline


def two_phase_baseline(rates, spec: ChannelSpec, n: int, rng) -> SimulationResult:
    """Retransmit-until-heard, then mix overheard queues pairwise.

    Receivers ignore coded packets they cannot immediately use, so only
    overhearing of uncoded phase-1 packets creates coding opportunities;
    this is what makes the approach fall short for K >= 3.
    """
    K = spec.K
    if K < 2:
        raise SchemeError("two-phase baseline needs at least two receivers")
    counts, lost = _counts_and_loss(n, rates)
    sampler = spec.sampler(rng)
    pending = []  # (owner, overheard-set) per undelivered packet
    delivered = [0] * K
    slots = 0
    failed = False
    # Phase 1: uncoded until at least one receiver has each packet.
    for k in range(1, K + 1):
        bit = 1 << (k - 1)
        for _ in range(counts[k - 1]):
            while True:
                if slots >= n:
                    failed = True
                    break
                slots += 1
                s_rx = sampler.draw()
                if s_rx:
                    if s_rx & bit:
                        delivered[k - 1] += 1
                    else:
                        pending.append((k, s_rx))
                    break
            if failed:
                break
        if failed:
            break
    # Phase 2: pairwise mixing of mutually overheard queues.
    if not failed:
        by_session = [[o for o in pending if o[0] == k] for k in range(1, K + 1)]
        live = [deque(lst) for lst in by_session]

        def next_eligible(q, partner_bit):
            scan = len(q)
            while scan and q:
                item = q[0]
                if item[1] & partner_bit:
                    return item
                q.rotate(-1)
                scan -= 1
            return None

        for i in range(1, K + 1):
            for k in range(i + 1, K + 1):
                bi, bk = 1 << (i - 1), 1 << (k - 1)
                head_i = next_eligible(live[i - 1], bk)
                head_k = next_eligible(live[k - 1], bi)
                while head_i is not None and head_k is not None and not failed:
                    if slots >= n:
                        failed = True
                        break
                    slots += 1
                    s_rx = sampler.draw()
                    if s_rx & bi:
                        live[i - 1].remove(head_i)
                        delivered[i - 1] += 1
                        head_i = next_eligible(live[i - 1], bk)
                    if s_rx & bk:
                        live[k - 1].remove(head_k)
                        delivered[k - 1] += 1
                        head_k = next_eligible(live[k - 1], bi)
        # leftovers go out uncoded
        for k in range(1, K + 1):
            bit = 1 << (k - 1)
            while live[k - 1] and not failed:
                if slots >= n:
                    failed = True
                    break
                slots += 1
                if sampler.draw() & bit:
                    live[k - 1].popleft()
                    delivered[k - 1] += 1
    decoded = [delivered[k] == counts[k] for k in range(K)]
    return SimulationResult(
        scheme="two-phase",
        n=n,
        slots_used=slots,
        decoded=decoded,
        decode_mode="structural",
        completed=not failed,
        counts=counts,
        lost_rate_fraction=lost,
        shortfall={"reason": "slots exhausted"} if failed else None,
    )


# ---------------------------------------------------------------------------
# capacity-achieving scheme for three receivers


def four_phase_k3(rates, spec: ChannelSpec, n: int, rng, q: int = DEFAULT_Q, *,
                  track_receivers: bool = False, accounting: bool = False,
                  trace: bool = False, seed: int | None = None) -> SimulationResult:
    """Ten sub-phases that drain every overhearing queue for K=3.

    Receivers are relabeled by dominance so each pairing phase's stop queue
    is the one guaranteed to drain first; partner queues that empty early
    degrade to partial mixes under the same mixing set.
    """
    if spec.K != 3:
        raise SchemeError("this scheme is specific to K=3")
    if min(spec.marginals) <= 0.0:
        raise SchemeError("drop receivers with zero marginal before running this scheme")
    rates = np.asarray(rates, dtype=float)
    t_room = bounds.outer_bound_max_t(spec, rates) if rates.any() else np.inf
    if t_room <= 1.0 + 1e-12:
        raise SchemeError("rate vector is not strictly inside the capacity outer bound")
    order = dominance_order(rates, spec).perm
    pspec = permute_receivers(spec, order)
    prates = [float(rates[k - 1]) for k in order]
    counts, lost_p = _counts_and_loss(n, prates)
    if sum(counts) == 0:
        return SimulationResult(
            scheme="four-phase", n=n, slots_used=0, decoded=[True] * 3,
            decode_mode="structural", completed=True, seed=seed,
            counts=[0, 0, 0], lost_rate_fraction=[0.0] * 3,
        )
    sim = PeSimulation(pspec, counts, q, rng, track_coding=track_receivers,
                       track_receivers=track_receivers, accounting=accounting, trace=trace)
    runner = _QueueRunner(sim)
    B1, B2, B3 = 1, 2, 4
    phases = [
        ("1.1", B1, [(1, (1, 0))], [(1, (1, 0))]),
        ("1.2", B2, [(2, (2, 0))], [(2, (2, 0))]),
        ("1.3", B3, [(3, (3, 0))], [(3, (3, 0))]),
        ("2.1", B2 | B3, [(2, (2, B3)), (3, (3, B2))], [(3, (3, B2))]),
        ("2.2", B1 | B3, [(1, (1, B3)), (3, (3, B1))], [(3, (3, B1))]),
        ("2.3", B1 | B2, [(1, (1, B2)), (2, (2, B1))], [(2, (2, B1))]),
        ("3.1", B2 | B3, [(2, (2, B3)), (3, (3, B1 | B2))], [(2, (2, B3))]),
        ("3.2", B1 | B3, [(1, (1, B3)), (3, (3, B1 | B2))], [(1, (1, B3))]),
        ("3.3", B1 | B2, [(1, (1, B2)), (2, (2, B1 | B3))], [(1, (1, B2))]),
        ("4", B1 | B2 | B3,
         [(1, (1, B2 | B3)), (2, (2, B1 | B3)), (3, (3, B1 | B2))],
         [(1, (1, B2 | B3)), (2, (2, B1 | B3)), (3, (3, B1 | B2))]),
    ]
    phase_log = []
    shortfall = None
    for name, T, sides, stop in phases:
        start = sim.t
        status = runner.run_phase(T, sides, stop, n)
        phase_log.append({
            "phase": name,
            "slots": sim.t - start,
            "queue_sizes": {f"{k}:{key[1]:03b}": len(runner.queue(key)) for k, key in sides},
        })
        if status == "out_of_slots":
            shortfall = {"phase": name, "queues": phase_log[-1]["queue_sizes"]}
            break
    completed = shortfall is None
    decoded_p = sim.decoded() if track_receivers else sim.structural_decoded()
    decoded = [False] * 3
    lost = [0.0] * 3
    for i, orig in enumerate(order):
        decoded[orig - 1] = decoded_p[i]
        lost[orig - 1] = lost_p[i]
    state_slots = {
        (order[k - 1], _unpermute_mask(m, order)): v
        for (k, m), v in sim.state_slots.items()
    }
    per_packet = None
    if accounting:
        per_packet = {}
        for (coord, m), v in sim.packet_state_time.items():
            owner = sim.packets[coord].owner
            per_packet[(order[owner - 1], coord, _unpermute_mask(m, order))] = v
    return SimulationResult(
        scheme="four-phase",
        n=n,
        slots_used=sim.t,
        decoded=decoded,
        decode_mode="exact" if track_receivers else "structural",
        completed=completed,
        seed=seed,
        counts=[counts[order.index(k + 1)] for k in range(3)],
        lost_rate_fraction=lost,
        shortfall=shortfall,
        phase_log=phase_log,
        state_slots=state_slots,
        packet_state_time=per_packet,
        trace=sim.trace,
    )


# ---------------------------------------------------------------------------
# sequential phase-per-subset scheme for general K


def sequential_pe(rates, spec: ChannelSpec, schedule: ScheduleW, n: int, rng,
                  q: int = DEFAULT_Q, *, track_receivers: bool = False,
                  trace: bool = False, validate: bool = True) -> SimulationResult:
    """Visit every non-empty mixing set once, smallest first, on fixed budgets.

    Within phase T each session k walks its queue states from T\\k upward in
    the subset ordering, spending the scheduled number of slots in each;
    empty queues contribute nothing for the remainder of their segment.
    """
    K = spec.K
    rates = np.asarray(rates, dtype=float)
    ordering = schedule.ordering
    if validate and rates.any():
        viol = bounds.check_inner_variables(spec, rates, schedule.as_inner_vars(), ordering)
        if viol > 1e-7:
            raise SchemeError(f"schedule violates the budget inequalities by {viol:.3e}")
    counts, lost = _counts_and_loss(n, rates)
    if sum(counts) == 0:
        return SimulationResult(scheme="sequential", n=n, slots_used=0, decoded=[True] * K,
                                decode_mode="structural", completed=True, counts=counts,
                                lost_rate_fraction=lost)
    sim = PeSimulation(spec, counts, q, rng, track_coding=track_receivers,
                       track_receivers=track_receivers, trace=trace)
    runner = _QueueRunner(sim)
    full = spec.full_mask
    shortfall = None
    phase_log = []
    for T in ordering.sequence:
        if T == 0:
            continue
        plans = {}
        for k in range(1, K + 1):
            kbit = 1 << (k - 1)
            if not T & kbit:
                continue
            Tp = T & ~kbit
            rest = full & ~kbit
            segs = []
            for S in ordering.sequence:
                if S & Tp == Tp and S & rest == S:
                    slots = int(round(n * schedule.w.get((k, S, Tp), 0.0)))
                    if slots > 0:
                        segs.append([S, slots])
            if segs:
                plans[k] = segs
        if not plans:
            continue
        phase_len = max(sum(s for _, s in segs) for segs in plans.values())
        runner.park_held()
        start = sim.t
        seg_idx = {k: 0 for k in plans}
        seg_left = {k: plans[k][0][1] for k in plans}
        for _ in range(phase_len):
            if sim.t >= n:
                active = {k: plans[k][seg_idx[k]][0] for k in plans if seg_idx[k] < len(plans[k])}
                shortfall = {"phase": T, "active_states": active}
                break
            targets = {}
            for k in list(plans):
                if seg_idx[k] >= len(plans[k]):
                    continue
                S = plans[k][seg_idx[k]][0]
                key = (k, S)
                held = runner.held.get(k)
                if held is not None and held.overhearing != S:
                    runner.queue((k, held.overhearing)).appendleft(held)
                    runner.held[k] = None
                    held = None
                    sim.invalidate_selection()
                if held is None and runner.queue(key):
                    runner.held[k] = runner.queue(key).popleft()
                    sim.invalidate_selection()
                if runner.held.get(k) is not None:
                    targets[k] = runner.held[k]
            if targets:
                if sim.f_change or sim.current is None:
                    sim.select(T, targets)
                res = sim.transmit()
                if res.fired:
                    runner.absorb_fired(res.fired)
            else:
                sim.tick_idle()
            for k in list(plans):
                if seg_idx[k] >= len(plans[k]):
                    continue
                seg_left[k] -= 1
                if seg_left[k] == 0:
                    held = runner.held.get(k)
                    if held is not None:
                        runner.queue((k, held.overhearing)).appendleft(held)
                        runner.held[k] = None
                        sim.invalidate_selection()
                    seg_idx[k] += 1
                    if seg_idx[k] < len(plans[k]):
                        seg_left[k] = plans[k][seg_idx[k]][1]
        phase_log.append({"phase": T, "slots": sim.t - start})
        if shortfall:
            break
    # Straggler sweep: budgets cover expected queue loads, so O(sqrt(n))
    # packets per queue can outlive their phase.  Send them solo (mixing set
    # = own session) out of the leftover slot budget; this sits outside the
    # one-visit-per-subset discipline and is logged separately.
    if shortfall is None and not sim.all_done():
        start = sim.t
        runner.park_held()
        for k in range(1, K + 1):
            status = runner.run_phase_pending(k, n)
            if status == "out_of_slots":
                shortfall = {"phase": "cleanup", "session": k}
                break
        phase_log.append({"phase": "cleanup", "slots": sim.t - start})
    completed = shortfall is None and sim.all_done()
    return SimulationResult(
        scheme="sequential",
        n=n,
        slots_used=sim.t,
        decoded=sim.decoded() if track_receivers else sim.structural_decoded(),
        decode_mode="exact" if track_receivers else "structural",
        completed=completed,
        counts=counts,
        lost_rate_fraction=lost,
        shortfall=shortfall,
        phase_log=phase_log,
        state_slots=dict(sim.state_slots),
        trace=sim.trace,
    )


# ---------------------------------------------------------------------------
# expected slot accounting (three receivers)


def expected_slot_accounting(rates, spec: ChannelSpec) -> dict:
    """Expected logical slots per (session, overhearing state), packets-per-slot units.

    Policy-independent: the exit rate from any union of states depends only
    on which receivers must hear the packet, so the twelve state occupancies
    follow from inclusion-exclusion over union probabilities.
    """
    if spec.K != 3:
        raise SchemeError("slot accounting is specific to K=3")
    if min(spec.marginals) <= 0.0:
        raise SchemeError("slot accounting needs positive marginals")
    out = {}
    full = spec.full_mask
    for k in range(1, 4):
        rk = float(rates[k - 1])
        rest = full & ~(1 << (k - 1))
        S0 = rest
        while True:
            out[(k, S0)] = rk * bounds.L_S_spec(spec, S0)
            if S0 == 0:
                break
            S0 = (S0 - 1) & rest
    return out
