"""Run the capacity-achieving three-receiver scheme and audit its phases.

At 95% of the perfectly fair boundary the ten sub-phases drain every
overhearing queue inside the slot budget, and the per-phase durations land
on their occupancy-identity predictions.  The two-phase baseline, run at
the same load on a channel where mixing three sessions matters, fails.

Run:  python demos/demo_four_phase.py
"""

import numpy as np

from pecap import bounds, schemes
from pecap.channel import make_spatially_independent


def main():
    spec = make_spatially_independent([0.7, 0.5, 0.3])
    rates = schemes.backoff_rates(spec, np.ones(3), epsilon=0.05)
    n = 50_000
    print(f"channel (0.7, 0.5, 0.3), per-user rate {rates[0]:.5f}, n = {n}")
    print(f"dominance relabeling: {schemes.dominance_order(rates, spec).perm}\n")

    res = schemes.four_phase_k3(rates, spec, n, np.random.default_rng(1), seed=1)
    print(f"slots used {res.slots_used}/{n}, all sessions decoded: {all(res.decoded)}")
    print("per-phase slot counts (relabeled receiver indices):")
    for entry in res.phase_log:
        print(f"  phase {entry['phase']:>3}: {entry['slots']:6d} slots   "
              f"end-of-phase queue sizes {entry['queue_sizes']}")

    acct = schemes.expected_slot_accounting(rates, spec)
    print("\nexpected logical-slot occupancies (session, overheard-by) per n:")
    for (k, S0), val in sorted(acct.items()):
        names = ",".join(str(i + 1) for i in range(3) if S0 >> i & 1) or "-"
        print(f"  session {k}, overheard by {{{names}}}: {val:.4f}")

    print("\nthe pairwise-mix baseline at 99% of a symmetric capacity point:")
    sym = make_spatially_independent([0.4, 0.4, 0.4])
    load = schemes.backoff_rates(sym, np.ones(3), epsilon=0.01)
    feasible = bounds.inner_bound_feasible(sym, load) is not None
    res2 = schemes.two_phase_baseline(load, sym, 30_000, np.random.default_rng(2))
    print(f"  point inside the coding capacity region: {feasible}")
    print(f"  two-phase finished within budget: {res2.completed} "
          f"(used {res2.slots_used} slots)")


if __name__ == "__main__":
    main()
