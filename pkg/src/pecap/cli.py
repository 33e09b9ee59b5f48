"""Command-line front end: bounds sweeps, scheme simulations, figure data, self-checks.

Every command is reproducible from its config and seed, both of which are
embedded in the emitted CSV/JSON.  Exit codes: 0 success, 1 usage error,
2 self-check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from multiprocessing import Pool

import numpy as np

from . import bounds, schemes
from .channel import ChannelSpec, make_spatially_independent, make_symmetric
from .pe_core import random_pe_run

SCHEMA = "pecap/v1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _floats(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _load_spec(args) -> ChannelSpec:
    picks = [args.spec is not None, args.independent is not None, args.symmetric is not None]
    if sum(picks) != 1:
        raise _usage_error("exactly one of --spec/--independent/--symmetric is required")
    if args.spec:
        return ChannelSpec.load(args.spec)
    if args.independent:
        return make_spatially_independent(_floats(args.independent))
    mass = _floats(args.symmetric)
    return make_symmetric(len(mass) - 1, mass)


def _usage_error(msg) -> SystemExit:
    sys.stderr.write(f"error: {msg}\n")
    return SystemExit(1)


def _emit(doc: dict, rows: list, out, fmt: str):
    if fmt == "json":
        payload = dict(doc)
        payload["rows"] = rows
        text = json.dumps(payload, indent=2, default=float)
    else:
        buf = io.StringIO()
        buf.write(f"# {SCHEMA} {json.dumps(doc, default=float)}\n")
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _add_channel_args(p):
    p.add_argument("--spec", help="channel spec JSON file")
    p.add_argument("--independent", help="comma-separated marginals p1,..,pK")
    p.add_argument("--symmetric", help="comma-separated per-cardinality masses m0,..,mK")


def _add_output_args(p):
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


# ---------------------------------------------------------------------------
# bounds sweep


def _bounds_one(payload):
    spec_doc, direction, engine = payload
    spec = ChannelSpec.from_json(spec_doc)
    v = np.asarray(direction)
    row = {f"dir_{k + 1}": float(v[k]) for k in range(spec.K)}
    try:
        t_out = bounds.outer_bound_max_t(spec, v)
        t_in = bounds.inner_bound_max_t(spec, v, engine=engine)
        row.update(t_outer=t_out, t_inner=t_in,
                   defi=max((t_out - t_in) / t_out, 0.0) if t_out > 0 else float("nan"),
                   status="ok")
    except bounds.LpEngineError as exc:
        row.update(t_outer=float("nan"), t_inner=float("nan"), defi=float("nan"),
                   status=f"lp-failure: {exc}")
    return row


def cmd_bounds(args) -> int:
    if args.directions < 0 or args.workers < 1:
        raise _usage_error("invalid numeric parameters (directions/workers)")
    spec = _load_spec(args)
    rng = np.random.default_rng(args.seed)
    dirs = [bounds.sample_direction(spec.K, rng) for _ in range(args.directions)]
    payloads = [(spec.to_json(), list(map(float, v)), args.engine) for v in dirs]
    if args.workers > 1:
        with Pool(args.workers) as pool:
            rows = pool.map(_bounds_one, payloads)
    else:
        rows = [_bounds_one(p) for p in payloads]
    finite = [r["defi"] for r in rows if r["status"] == "ok"]
    doc = {
        "schema": SCHEMA,
        "command": "bounds",
        "config": {"K": spec.K, "channel": spec.to_json(), "directions": args.directions,
                   "engine": args.engine},
        "seed": args.seed,
        "summary": {"max_defi": max(finite) if finite else None,
                    "failures": sum(r["status"] != "ok" for r in rows)},
    }
    _emit(doc, rows, args.out, args.format)
    return 0


# ---------------------------------------------------------------------------
# simulate


def _resolve_rates(args, spec: ChannelSpec) -> np.ndarray:
    if args.rates:
        rates = np.asarray(_floats(args.rates))
        if rates.shape != (spec.K,):
            raise _usage_error(f"need {spec.K} rates")
        return rates
    direction = np.ones(spec.K)
    return schemes.backoff_rates(spec, direction, epsilon=args.epsilon)


def _simulate_one(payload):
    (spec_doc, scheme, rates, n, q, seed, margin) = payload
    spec = ChannelSpec.from_json(spec_doc)
    rng = np.random.default_rng(seed)
    if scheme == "two_phase":
        res = schemes.two_phase_baseline(rates, spec, n, rng)
    elif scheme == "four_phase":
        res = schemes.four_phase_k3(rates, spec, n, rng, q=q, seed=seed)
    elif scheme == "sequential":
        sched = bounds.sequential_schedule(spec, np.asarray(rates), margin=margin)
        res = schemes.sequential_pe(rates, spec, sched, n, rng, q=q)
    elif scheme == "random_pe":
        counts = [int(n * r + 1e-9) for r in rates]
        res = random_pe_run(spec, counts, n, q=q, seed=seed,
                            check_every_slot=n <= 200)
    else:
        raise ValueError(f"unknown scheme {scheme}")
    return {
        "seed": seed,
        "slots_used": res.slots_used,
        "decoded_all": res.all_decoded,
        "completed": res.completed,
        "decode_mode": res.decode_mode,
    }


def cmd_simulate(args) -> int:
    if args.trials < 0 or args.n < 1 or args.q < 2 or not 0 <= args.epsilon < 1 or args.margin < 0:
        raise _usage_error("invalid numeric parameters (trials/n/q/epsilon/margin)")
    spec = _load_spec(args)
    if args.scheme == "four_phase" and spec.K != 3:
        raise _usage_error("four_phase requires a K=3 channel")
    if args.scheme == "two_phase" and spec.K < 2:
        raise _usage_error("two_phase requires K >= 2")
    rates = _resolve_rates(args, spec)
    payloads = [
        (spec.to_json(), args.scheme, list(map(float, rates)), args.n, args.q,
         args.seed + i, args.margin)
        for i in range(args.trials)
    ]
    if args.workers > 1:
        with Pool(args.workers) as pool:
            rows = pool.map(_simulate_one, payloads)
    else:
        rows = [_simulate_one(p) for p in payloads]
    ok = sum(r["decoded_all"] for r in rows)
    doc = {
        "schema": SCHEMA,
        "command": "simulate",
        "config": {"scheme": args.scheme, "K": spec.K, "channel": spec.to_json(),
                   "rates": list(map(float, rates)), "n": args.n, "q": args.q,
                   "trials": args.trials, "epsilon": args.epsilon, "margin": args.margin},
        "seed": args.seed,
        "summary": {
            "trials": args.trials,
            "decoded_all": ok,
            "success_rate": ok / args.trials if args.trials else None,
            "mean_slots": float(np.mean([r["slots_used"] for r in rows])) if rows else None,
        },
    }
    _emit(doc, rows, args.out, args.format)
    return 0


# ---------------------------------------------------------------------------
# figure data


def _even_marginals(p: float, K: int) -> np.ndarray:
    return np.asarray([p + k * (1.0 - p) / (K - 1) for k in range(K)])


def figure_rows(which: str, points: int = 20, engine: str = "auto") -> list:
    """Per-p curve data: coding sum rates against time-sharing baselines."""
    rows = []
    if which in ("fig5", "fig6"):
        Ks = (2, 4) if which == "fig5" else (20, 100)
        for K in Ks:
            for p in np.linspace(0.05, 1.0, points):
                coding = bounds.sum_rate_perf_fair(np.full(K, p)) if p < 1.0 else 1.0
                rows.append({"figure": which, "K": K, "p": round(float(p), 6),
                             "coding_sum_perfect_fair": coding, "tdma_sum_perfect_fair": p})
        return rows
    if which == "fig7":
        K = 6
        for p in np.linspace(0.0, 0.95, points):
            marg = np.maximum(_even_marginals(p, K), 1e-6)
            t_out = bounds.outer_bound_max_t(make_spatially_independent(marg), marg)
            t_in = bounds.inner_bound_max_t(make_spatially_independent(marg), marg, engine=engine)
            pf_sum = float(t_in * marg.sum())
            miss = np.cumprod(1 - marg)
            perfect = K / float((1.0 / (1 - miss)).sum())
            tdma_perfect = K / float((1.0 / marg).sum())
            sym = bounds.sum_rate_perf_fair(np.full(K, p)) if p > 0 else 0.0
            rows.append({
                "figure": "fig7", "K": K, "p": round(float(p), 6),
                "coding_sum_prop_fair": pf_sum,
                "outer_inner_gap": float(t_out - t_in),
                "coding_sum_perfect_fair": perfect,
                "tdma_sum_prop_fair": float(marg.mean()),
                "tdma_sum_perfect_fair": tdma_perfect,
                "sym_coding_sum": sym,
                "sym_tdma_sum": float(p),
            })
        return rows
    if which == "fig8":
        K = 20
        for p in np.linspace(0.0, 0.95, points):
            marg = np.maximum(_even_marginals(p, K), 1e-6)
            miss = np.cumprod(1 - marg)
            pu = 1 - miss
            perfect = K / float((1.0 / pu).sum())
            t_prop = 1.0 / float((marg / pu).sum())
            rows.append({
                "figure": "fig8", "K": K, "p": round(float(p), 6),
                "coding_sum_perfect_fair": perfect,
                "coding_sum_prop_fair": float(t_prop * marg.sum()),
                "prop_fair_exact": bool(marg.min() >= 0.5),
                "tdma_sum_prop_fair": float(marg.mean()),
                "tdma_sum_perfect_fair": K / float((1.0 / marg).sum()),
            })
        return rows
    raise ValueError(f"unknown figure id {which!r}")


def cmd_figures(args) -> int:
    try:
        rows = figure_rows(args.which, args.points, args.engine)
    except ValueError as exc:
        raise _usage_error(str(exc))
    doc = {
        "schema": SCHEMA,
        "command": "figures",
        "config": {"which": args.which, "points": args.points},
        "seed": None,
        "summary": {"rows": len(rows)},
    }
    _emit(doc, rows, args.out, args.format)
    return 0


# ---------------------------------------------------------------------------
# self-check


def _check_battery(quick: bool) -> list:
    checks = []
    rng = np.random.default_rng(20_24)

    def record(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    # replay of the five-slot walkthrough
    from .pe_core import PeSimulation

    sp = make_spatially_independent([0.5, 0.5, 0.5])
    sim = PeSimulation(sp, [1, 1, 1], q=5, rng=np.random.default_rng(0),
                       track_coding=True, track_receivers=True)
    X1, X2, X3 = sim.packets
    sim.select(0b001, {1: X1}, coeffs=[1]); sim.transmit(s_rx=0b010)
    sim.select(0b010, {2: X2}, coeffs=[1]); sim.transmit(s_rx=0b001)
    sim.select(0b100, {3: X3}, coeffs=[1]); sim.transmit(s_rx=0b011)
    sim.select(0b011, {1: X1, 2: X2}, coeffs=[1, 1]); sim.transmit(s_rx=0b100)
    sim.select(0b111, {1: X1, 2: X2, 3: X3}, coeffs=[1, 0, 1]); sim.transmit(s_rx=0b111)
    record("five-slot walkthrough decodes", sim.all_done() and all(sim.decode_all(k) for k in (1, 2, 3)))

    # K=2 LP equals the closed form
    n_spec = 5 if quick else 25
    worst = 0.0
    for _ in range(n_spec):
        marg = rng.uniform(0.05, 0.95, size=2)
        spec = make_spatially_independent(marg)
        for _ in range(4):
            v = bounds.sample_direction(2, rng)
            t_in = bounds.inner_bound_max_t(spec, v)
            p1, p2, pu = spec.marginal(1), spec.marginal(2), spec.p_union(3)
            t_closed = 1.0 / max(v[0] / p1 + v[1] / pu, v[0] / pu + v[1] / p2)
            worst = max(worst, abs(t_in - t_closed) / t_closed)
    record("K=2 inner bound equals closed form", worst <= 1e-6, f"max rel err {worst:.2e}")

    # K=3 tightness
    n_inst = 10 if quick else 50
    worst = 0.0
    for _ in range(n_inst):
        spec = make_spatially_independent(rng.uniform(0.05, 0.95, size=3))
        worst = max(worst, bounds.deficiency(spec, bounds.sample_direction(3, rng)))
    record("K=3 deficiency <= 1e-6", worst <= 1e-6, f"max defi {worst:.2e}")

    # per-slot span-check micro-suite
    n_runs = 20 if quick else 100
    ni_ok = True
    span_fail = 0
    for s in range(n_runs):
        res = random_pe_run(sp, [2, 1, 1], n=15, q=1 << 16, seed=s)
        ni_ok = ni_ok and res.non_interference_ok
        span_fail += res.span_check_failures
    record("non-interference check holds each slot", ni_ok)
    record("decodability-span failures rare", span_fail <= max(1, n_runs // 20), f"{span_fail} failures")

    # four-phase end-to-end
    spec = make_spatially_independent([0.7, 0.5, 0.3])
    rates = schemes.backoff_rates(spec, np.ones(3), epsilon=0.05)
    trials = 3 if quick else 10
    ok = 0
    for s in range(trials):
        r = schemes.four_phase_k3(rates, spec, 5000, np.random.default_rng(s))
        ok += r.completed and all(r.decoded)
    record("four-phase decodes at 95% load", ok == trials, f"{ok}/{trials}")
    return checks


def cmd_check(args) -> int:
    checks = _check_battery(args.quick)
    failed = 0
    for name, ok, detail in checks:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f"  ({detail})"
        print(line)
        failed += not ok
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 2 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    ap = _Parser(prog="pecap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="outer/inner bound sweep over random directions")
    _add_channel_args(b)
    b.add_argument("--directions", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--engine", default="auto", choices=("auto", "own", "scipy", "exact"),
                   help="LP backend; 'exact' is rational arithmetic for tiny K")
    b.add_argument("--workers", type=int, default=1)
    _add_output_args(b)
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", help="run a transmission scheme over seeded trials")
    _add_channel_args(s)
    s.add_argument("--scheme", required=True,
                   choices=("two_phase", "four_phase", "sequential", "random_pe"))
    s.add_argument("--rates", help="comma-separated per-session rates (default: fair backoff)")
    s.add_argument("--epsilon", type=float, default=0.05, help="backoff from the fair boundary")
    s.add_argument("--margin", type=float, default=0.03, help="budget headroom for sequential")
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--q", type=int, default=1 << 16)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    _add_output_args(s)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figures", help="regenerate sum-rate curve data")
    f.add_argument("--which", required=True, choices=("fig5", "fig6", "fig7", "fig8"))
    f.add_argument("--points", type=int, default=20)
    f.add_argument("--engine", default="auto", choices=("auto", "own", "scipy"))
    _add_output_args(f)
    f.set_defaults(func=cmd_figures)

    c = sub.add_parser("check", help="run the built-in verification battery")
    c.add_argument("--quick", action="store_true")
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
