"""Evaluate the capacity outer and inner bounds and watch them coincide.

The outer bound is a family of K! time-sharing inequalities; the inner
bound is the feasibility region of a slot-budget linear program.  On
three-receiver channels they provably agree; for K = 4..6 the gap stays
below the LP solver's precision on every random instance tried here.

Run:  python demos/demo_bounds.py
"""

import numpy as np

from pecap import bounds
from pecap.channel import make_spatially_independent


def main():
    rng = np.random.default_rng(7)

    spec = make_spatially_independent([0.7, 0.5, 0.3])
    v = np.ones(3)
    t_out = bounds.outer_bound_max_t(spec, v)
    t_in = bounds.inner_bound_max_t(spec, v)
    print(f"three receivers, marginals (0.7, 0.5, 0.3), equal-rate direction:")
    print(f"  outer bound t = {t_out:.6f}   inner bound t = {t_in:.6f}")
    print(f"  per-user boundary rate = {t_out:.5f} (the 0.16697 figure)\n")

    print("random channels, K = 4..6, ten directions each:")
    for K in (4, 5, 6):
        worst = 0.0
        for _ in range(10):
            spc = make_spatially_independent(rng.uniform(0.05, 0.95, size=K))
            worst = max(worst, bounds.deficiency(spc, bounds.sample_direction(K, rng)))
        print(f"  K={K}: worst relative gap {worst:.2e}")

    print("\nsymmetric channels collapse to a single inequality:")
    spec = make_spatially_independent([0.5, 0.5, 0.5, 0.5])
    v = bounds.sample_direction(4, rng)
    t_out = bounds.outer_bound_max_t(spec, v)
    vb = np.sort(v)[::-1]
    t_formula = 1 / sum(vb[k - 1] / spec.p_union((1 << k) - 1) for k in range(1, 5))
    print(f"  LP/DP value {t_out:.9f} vs closed form {t_formula:.9f}")

    print("\none-sidedly fair rates admit a closed form too:")
    p = np.asarray([0.3, 0.5, 0.7])
    boundary = 1 / np.sum(1 / (1 - np.cumprod(1 - p)))
    print(f"  perfectly fair boundary on (0.3, 0.5, 0.7): {boundary:.5f}")
    print(f"  accepted just inside: {bounds.osf_capacity_check(p, [boundary * 0.999999] * 3)}")
    print(f"  rejected just outside: {not bounds.osf_capacity_check(p, [boundary * 1.001] * 3)}")


if __name__ == "__main__":
    main()
