"""Acceptance suite: one test per criterion, at the stated sizes and tolerances.

Each test prints a [PASS] line with the measured figure of merit; a failing
assert marks the criterion red.  Statistical cases use frozen seeds.
"""

import numpy as np
import pytest

from pecap import bounds, cli, schemes
from pecap.channel import make_spatially_independent, make_symmetric, submasks
from pecap.pe_core import PeSimulation, random_pe_run

FIG3 = make_spatially_independent([0.7, 0.5, 0.3])


def _random_symmetric(rng, K):
    import math

    raw = rng.uniform(0.05, 1.0, size=K + 1)
    total = sum(math.comb(K, c) * raw[c] for c in range(K + 1))
    return make_symmetric(K, raw / total)


def test_criterion_01_k2_capacity_equivalence():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        spec = make_spatially_independent(rng.uniform(0.05, 0.95, size=2))
        p1, p2, pu = spec.marginal(1), spec.marginal(2), spec.p_union(3)
        for _ in range(50):
            v = bounds.sample_direction(2, rng)
            t_lp = bounds.inner_bound_max_t(spec, v)
            t_closed = 1.0 / max(v[0] / p1 + v[1] / pu, v[0] / pu + v[1] / p2)
            worst = max(worst, abs(t_lp - t_closed) / t_closed)
    assert worst <= 1e-6
    print(f"\n[PASS] criterion 1: K=2 LP == closed form over 10^4 cases, max rel err {worst:.2e}")


def test_criterion_02_k3_tightness():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(1000):
        spec = make_spatially_independent(rng.uniform(0.0, 1.0, size=3))
        if min(spec.marginals) <= 1e-12:
            continue
        v = bounds.sample_direction(3, rng)
        worst = max(worst, bounds.deficiency(spec, v))
    assert worst <= 1e-6
    print(f"\n[PASS] criterion 2: K=3 deficiency <= 1e-6 over 10^3 instances, max {worst:.2e}")


def test_criterion_03_deficiency_desk_scale():
    rng = np.random.default_rng(103)
    worst = {4: 0.0, 5: 0.0, 6: 0.0}
    for K in (4, 5, 6):
        for _ in range(100):
            spec = make_spatially_independent(rng.uniform(0.0, 1.0, size=K))
            if min(spec.marginals) <= 1e-12:
                continue
            for _ in range(10):
                v = bounds.sample_direction(K, rng)
                worst[K] = max(worst[K], bounds.deficiency(spec, v))
    assert all(w <= 0.001 for w in worst.values()), worst
    print(f"\n[PASS] criterion 3: max deficiency over 3x10^3 trials "
          f"K=4: {worst[4]:.2e}, K=5: {worst[5]:.2e}, K=6: {worst[6]:.2e}")


def test_criterion_04_symmetric_capacity():
    rng = np.random.default_rng(104)
    worst_gap = 0.0
    worst_collapse = 0.0
    for _ in range(100):
        K = int(rng.integers(2, 7))
        spec = _random_symmetric(rng, K)
        if spec.p_union(spec.full_mask) <= 1e-9:
            continue
        v = bounds.sample_direction(K, rng)
        t_out = bounds.outer_bound_max_t(spec, v)
        t_in = bounds.inner_bound_max_t(spec, v)
        worst_gap = max(worst_gap, abs(t_out - t_in) / t_out)
        vb = np.sort(v)[::-1]
        t_formula = 1.0 / sum(vb[k - 1] / spec.p_union((1 << k) - 1) for k in range(1, K + 1))
        worst_collapse = max(worst_collapse, abs(t_out - t_formula))
    assert worst_gap <= 1e-6
    assert worst_collapse <= 1e-12
    print(f"\n[PASS] criterion 4: symmetric t_in == t_out (max gap {worst_gap:.2e}), "
          f"single-inequality collapse exact (max {worst_collapse:.2e})")


def test_criterion_05_osf_capacity_boundary():
    rng = np.random.default_rng(105)
    for trial in range(100):
        K = 2 + trial % 4
        p = np.sort(rng.uniform(0.1, 0.9, size=K))
        gaps = np.sort(rng.uniform(0.2, 1.0, size=K))[::-1]
        direction = gaps / (1 - p)
        miss = np.cumprod(1 - p)
        t_star = 1.0 / np.sum(direction / (1 - miss))
        spec = make_spatially_independent(p)
        boundary = t_star * direction
        assert bounds.is_one_sidedly_fair(p, boundary)
        assert bounds.inner_bound_feasible(spec, (1 - 1e-6) * boundary) is not None, trial
        assert bounds.inner_bound_feasible(spec, (1 + 1e-3) * boundary) is None, trial
    print("\n[PASS] criterion 5: OSF boundary accepted at (1-1e-6), rejected at (1+1e-3), 100 cases")


def test_criterion_06_figure7_quoted_numbers():
    rows = cli.figure_rows("fig7", points=2)
    p0 = rows[0]
    assert abs(p0["p"]) < 1e-9
    prop_fair = p0["coding_sum_prop_fair"]
    assert abs(prop_fair - 0.56) <= 0.01, prop_fair
    sym = bounds.sum_rate_perf_fair([0.5] * 6)
    assert abs(sym - 0.79) <= 0.01, sym
    print(f"\n[PASS] criterion 6: proportional-fair sum at p=0 is {prop_fair:.4f} (0.56 +- 0.01); "
          f"symmetric sum at p=0.5 is {sym:.4f} (0.79 +- 0.01)")


def test_criterion_07_four_phase_achievability():
    rates = schemes.backoff_rates(FIG3, np.ones(3), epsilon=0.05)
    assert abs(rates[0] / 0.95 - 0.16697) < 5e-6
    ok = 0
    for seed in range(100):
        res = schemes.four_phase_k3(rates, FIG3, 20_000, np.random.default_rng(seed),
                                    q=1 << 16, seed=seed)
        ok += res.completed and all(res.decoded) and res.slots_used <= 20_000
    assert ok >= 95
    print(f"\n[PASS] criterion 7: four-phase decoded {ok}/100 trials at 0.95 load, n=2e4")


def test_criterion_08_span_check_property_suite():
    rng = np.random.default_rng(108)
    non_interference_all = True
    span_failed_runs = 0
    for run in range(1000):
        counts = [int(rng.integers(1, 3)) for _ in range(3)]
        n = int(rng.integers(8, 21))
        res = random_pe_run(FIG3, counts, n=n, q=1 << 16, seed=int(rng.integers(0, 2**31)))
        non_interference_all = non_interference_all and res.non_interference_ok
        span_failed_runs += res.span_check_failures
    assert non_interference_all
    assert span_failed_runs <= 3
    print(f"\n[PASS] criterion 8: non-interference held in all 10^3 runs; "
          f"{span_failed_runs} decodability-span failures (allowed <= 3)")


def test_criterion_09_worked_example_replay():
    spec = make_spatially_independent([0.5, 0.5, 0.5])
    sim = PeSimulation(spec, [1, 1, 1], q=5, rng=np.random.default_rng(0),
                       track_coding=True, track_receivers=True)
    X1, X2, X3 = sim.packets

    def table():
        return [(tuple(int(x) for x in p.vec), p.overhearing) for p in sim.packets]

    script = [
        (0b001, {1: X1}, [1], 0b010,
         [((1, 0, 0), 0b010), ((0, 1, 0), 0), ((0, 0, 1), 0)]),
        (0b010, {2: X2}, [1], 0b001,
         [((1, 0, 0), 0b010), ((0, 1, 0), 0b001), ((0, 0, 1), 0)]),
        (0b100, {3: X3}, [1], 0b011,
         [((1, 0, 0), 0b010), ((0, 1, 0), 0b001), ((0, 0, 1), 0b011)]),
        (0b011, {1: X1, 2: X2}, [1, 1], 0b100,
         [((1, 1, 0), 0b110), ((1, 1, 0), 0b101), ((0, 0, 1), 0b011)]),
        (0b111, {1: X1, 2: X2, 3: X3}, [1, 0, 1], 0b111,
         [((1, 1, 1), 0b111), ((1, 1, 1), 0b111), ((1, 1, 1), 0b111)]),
    ]
    for T, targets, coeffs, s_rx, expected in script:
        sim.select(T, targets, coeffs=coeffs)
        sim.transmit(s_rx=s_rx)
        assert table() == expected, (sim.t, table(), expected)
        assert sim.check_non_interference()
    assert all(sim.decode_all(k) for k in (1, 2, 3))
    print("\n[PASS] criterion 9: five-slot walkthrough reproduces all printed tables and decodes")


def test_criterion_10_geometric_tail_oracle():
    rng = np.random.default_rng(110)
    for _ in range(50):
        K = int(rng.integers(2, 6))
        p = rng.uniform(0.15, 0.9, size=K)
        S = int(rng.integers(0, (1 << K) - 1))
        mean, se = bounds.gamma_oracle(p, S, 1_000_000, rng)
        assert abs(mean - bounds.L_S(p, S)) <= 4 * se + 1e-12
    # exact inclusion-exclusion identity
    for _ in range(100):
        K = int(rng.integers(2, 6))
        p = rng.uniform(0.05, 0.95, size=K)
        S = int(rng.integers(0, (1 << K) - 1))
        total = sum(bounds.L_S(p, sub) for sub in submasks(S))
        pu = 1 - np.prod([1 - p[k] for k in range(K) if not S & (1 << k)])
        assert abs(total - 1 / pu) <= 1e-10
    # queue-size monotonicity under one-sided fairness
    for _ in range(10_000):
        K = int(rng.integers(2, 6))
        p = np.sort(rng.uniform(0.1, 0.9, size=K))
        gaps = np.sort(rng.uniform(0.1, 1.0, size=K))[::-1]
        rates = gaps / (1 - p)
        T = int(rng.integers(1, 1 << K))
        members = [k for k in range(1, K + 1) if T & (1 << (k - 1))]
        for k1, k2 in zip(members, members[1:]):
            lhs = rates[k1 - 1] * bounds.L_S(p, T & ~(1 << (k1 - 1)))
            rhs = rates[k2 - 1] * bounds.L_S(p, T & ~(1 << (k2 - 1)))
            assert lhs >= rhs - 1e-9
    print("\n[PASS] criterion 10: Monte-Carlo tail oracle, sum identity, and fairness "
          "monotonicity all verified")


def test_criterion_11_slot_accounting():
    rates = schemes.backoff_rates(FIG3, np.ones(3), epsilon=0.05)
    n = 100_000
    res = schemes.four_phase_k3(rates, FIG3, n, np.random.default_rng(11),
                                accounting=True, seed=11)
    assert res.completed
    acct = schemes.expected_slot_accounting(rates, FIG3)
    per_packet = res.packet_state_time
    counts = {k: res.counts[k - 1] for k in (1, 2, 3)}
    worst_z = 0.0
    session_coords = {k: sorted({c for (kk, c, _m) in per_packet if kk == k}) for k in (1, 2, 3)}
    assert all(len(session_coords[k]) == counts[k] for k in (1, 2, 3))
    for (k, S0), per_n in acct.items():
        expect = n * per_n
        per_coord = {}
        for (kk, coord, mask), t in per_packet.items():
            if kk == k and mask == S0:
                per_coord[coord] = t
        times = np.asarray([per_coord.get(c, 0) for c in session_coords[k]], dtype=float)
        got = times.sum()
        sigma = np.sqrt(len(times) * times.var()) if times.var() > 0 else 1.0
        z = abs(got - expect) / sigma
        worst_z = max(worst_z, z)
        assert z <= 3.0, ((k, bin(S0)), got, expect, z)
    print(f"\n[PASS] criterion 11: all twelve state occupancies within 3 sigma at n=1e5 "
          f"(worst z = {worst_z:.2f})")


def test_criterion_12_deterministic_coefficients():
    rng = np.random.default_rng(112)
    span_check_failures = 0
    non_interference_all = True
    for run in range(100):
        counts = [int(rng.integers(1, 3)) for _ in range(3)]
        n = int(rng.integers(10, 25))
        res = random_pe_run(FIG3, counts, n=n, q=1 << 8,
                            seed=int(rng.integers(0, 2**31)), deterministic=True)
        non_interference_all = non_interference_all and res.non_interference_ok
        span_check_failures += res.span_check_failures
    assert non_interference_all
    assert span_check_failures == 0
    print("\n[PASS] criterion 12: zero decodability failures in 100 runs with "
          "deterministic coefficients on GF(256)")
