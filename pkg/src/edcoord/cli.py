"""Benchmark CLI: centralized vs. decomposed dispatch on a case, with reports.

Exit codes: 0 success, 1 input/infeasibility error, 2 ran but a coordinated
mode failed to converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .case import (CaseError, load_case, load_scenario, validate_reserve)
from .coordinator import AppConfig, run_app
from .dispatch import InfeasibleDispatch, solve_centralized
from .network import build_network
from .split import split_horizon, split_plan_dict
from .synthetic import generate_synthetic_case

MODES = ("centralized", "app-cold", "app-warm", "all")


def build_parser():
    p = argparse.ArgumentParser(
        prog="edcoord",
        description="Multi-interval economic dispatch: centralized benchmark and "
                    "decomposed, coordinated solves.")
    src = p.add_argument_group("input (file pair or synthetic)")
    src.add_argument("--case", help="grid case JSON file")
    src.add_argument("--profile", help="demand/reserve scenario CSV file")
    src.add_argument("--synthetic", type=int, metavar="N_BUSES",
                     help="generate a synthetic case with this many buses")
    src.add_argument("--seed", type=int, default=0, help="synthetic-case seed")
    src.add_argument("--horizon", type=int, default=168,
                     help="synthetic-case interval count")
    p.add_argument("--mode", choices=MODES, default="all")
    p.add_argument("--subhorizons", type=int, default=7)
    p.add_argument("--rho", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--out", help="write the JSON run report here")
    p.add_argument("--trace", help="write convergence trace CSV here "
                                   "(mode suffix added under --mode all)")
    p.add_argument("--schedule", help="write schedule CSV here "
                                      "(mode suffix added under --mode all)")
    p.add_argument("--dump-sf", metavar="FILE", help="debug: dump shift factors as CSV")
    p.add_argument("--dump-split", metavar="FILE",
                   help="debug: dump the sub-horizon plan as JSON")
    return p


def _load_inputs(args):
    if args.synthetic is not None:
        if args.case or args.profile:
            raise CaseError("give either --case/--profile or --synthetic, not both")
        return generate_synthetic_case(args.synthetic, args.seed, args.horizon)
    if not args.case or not args.profile:
        raise CaseError("need --case and --profile, or --synthetic")
    case = load_case(args.case)
    scenario = load_scenario(args.profile, case)
    return case, scenario


def _suffixed(path, mode, multi):
    if not multi:
        return path
    stem, dot, ext = path.rpartition(".")
    return f"{stem}.{mode}.{ext}" if dot else f"{path}.{mode}"


def write_schedule_csv(path, case, generation):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit", "interval", "p_mw"])
        for u, g in enumerate(case.generators):
            for t in range(generation.shape[1]):
                w.writerow([g.id, t + 1, repr(float(generation[u, t]))])


def _run_mode(mode, case, network, scenario, args):
    """Run one mode; wall time covers the solve calls only."""
    artifacts = {}
    if mode == "centralized":
        t0 = time.perf_counter()
        schedule = solve_centralized(case, network, scenario)
        wall = time.perf_counter() - t0
        trace = None
        iterations, converged = None, True
    else:
        config = AppConfig(rho=args.rho, gamma=args.gamma, alpha=args.alpha,
                           eps=args.eps, max_iter=args.max_iter,
                           init_mode=mode.removeprefix("app-"))
        schedule, trace = run_app(case, network, scenario, args.subhorizons, config)
        wall = trace.solve_time_s
        iterations, converged = trace.iterations, trace.converged
    multi = args.mode == "all"
    if args.trace and trace is not None:
        path = _suffixed(args.trace, mode, multi)
        trace.write_csv(path)
        artifacts["trace"] = path
    if args.schedule:
        path = _suffixed(args.schedule, mode, multi)
        write_schedule_csv(path, case, schedule.generation)
        artifacts["schedule"] = path
    return {
        "mode": mode,
        "cost_usd": schedule.production_cost,
        "iterations": iterations,
        "relative_error_pct": None,
        "wall_time_s": wall,
        "converged": converged,
        "feasible": schedule.feasibility.ok,
        "artifacts": artifacts,
    }


def _print_table(runs):
    header = f"{'mode':<12} {'cost ($)':>16} {'iters':>6} {'rel err (%)':>12} {'time (s)':>9}"
    print(header)
    print("-" * len(header))
    for r in runs:
        iters = "-" if r["iterations"] is None else str(r["iterations"])
        err = "-" if r["relative_error_pct"] is None else f"{r['relative_error_pct']:.4e}"
        print(f"{r['mode']:<12} {r['cost_usd']:>16.2f} {iters:>6} {err:>12} "
              f"{r['wall_time_s']:>9.3f}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        case, scenario = _load_inputs(args)
        reserve = validate_reserve(case, scenario)
        if not reserve.ok:
            bad = (reserve.failing_intervals() + 1).tolist()
            raise CaseError(f"capacity cannot cover demand plus reserve at "
                            f"intervals {bad}")
        network = build_network(case)
        if args.dump_sf:
            np.savetxt(args.dump_sf, network.shift_factors, delimiter=",",
                       header=",".join(case.buses), comments="")
        if args.dump_split:
            plan = split_plan_dict(split_horizon(scenario.n_intervals,
                                                 args.subhorizons))
            with open(args.dump_split, "w") as fh:
                json.dump(plan, fh, indent=2)
                fh.write("\n")
        if args.mode != "centralized" and args.subhorizons != 1:
            split_horizon(scenario.n_intervals, args.subhorizons)  # fail early

        modes = ["centralized", "app-cold", "app-warm"] if args.mode == "all" \
            else [args.mode]
        runs = [_run_mode(m, case, network, scenario, args) for m in modes]
    except (CaseError, ValueError, InfeasibleDispatch, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    reference = next((r for r in runs if r["mode"] == "centralized"), None)
    if reference is not None:
        for r in runs:
            r["relative_error_pct"] = 100.0 * (r["cost_usd"] - reference["cost_usd"]) \
                / reference["cost_usd"]
    _print_table(runs)

    if args.out:
        report = {"n_intervals": scenario.n_intervals,
                  "subhorizons": args.subhorizons,
                  "runs": runs}
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return 0 if all(r["converged"] for r in runs) else 2


if __name__ == "__main__":
    sys.exit(main())
