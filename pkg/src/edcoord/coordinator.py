"""Coordination loop for the decomposed dispatch, by the auxiliary problem principle.

Each boundary between consecutive sub-horizons duplicates the boundary hour's
generation: the left sub-horizon's coupling-hour output (phi_left) and the
right sub-horizon's hour-1 output (phi_right). The loop augments every
subproblem with proximal, cross, and multiplier terms on its shared
variables, solves the subproblems in parallel, exchanges the shared values,
and updates the multipliers until the largest boundary mismatch falls
within tolerance.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np
import scipy.sparse as sp

from . import qp as qpmod
from .case import GridCase, ScenarioData
from .dispatch import (DispatchSchedule, EdProblemSpec, InfeasibleDispatch,
                       assemble_ed_qp, check_feasibility, evaluate_cost,
                       solve_centralized)
from .network import NetworkModel
from .qp import QuadraticProgram, solve_qp
from .split import SubHorizon, build_subproblem_spec, split_horizon

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max-iterations"


@dataclass
class AppConfig:
    """Coordination coefficients; None means derive a default from the case.

    Defaults tie the proximal weight to the cost curvature: rho is a multiple
    of the units' mean quadratic-term curvature, with gamma = alpha = rho / 2.
    Keeping the cross and step weights at half the proximal weight leaves a
    stability margin; gamma equal to rho sits exactly on the boundary where
    the shared-variable iteration stops contracting and can stall.
    """
    rho: float | None = None
    gamma: float | None = None
    alpha: float | None = None
    eps: float = 0.1          # MW, infinity norm over boundaries and units
    max_iter: int = 200
    init_mode: str = "warm"   # "warm" | "cold"
    n_workers: int | None = None

    # proximal weight as a multiple of the mean cost curvature; large enough
    # to contract the boundary mismatch quickly, small enough that the
    # converged point stays close to the centralized optimum
    RHO_CURVATURE_MULTIPLE = 30.0

    def resolved(self, case: GridCase) -> "AppConfig":
        rho = self.rho if self.rho is not None else \
            float(self.RHO_CURVATURE_MULTIPLE
                  * np.mean(2.0 * case.gen_array("cost_a")))
        gamma = self.gamma if self.gamma is not None else rho / 2.0
        alpha = self.alpha if self.alpha is not None else rho / 2.0
        cfg = replace(self, rho=rho, gamma=gamma, alpha=alpha)
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("rho", "gamma", "alpha", "eps"):
            v = getattr(self, name)
            if v is None or v <= 0:
                raise ValueError(f"AppConfig.{name} must be positive, got {v}")
        if self.max_iter < 1:
            raise ValueError(f"AppConfig.max_iter must be >= 1, got {self.max_iter}")
        if self.init_mode not in ("cold", "warm"):
            raise ValueError(f"AppConfig.init_mode must be 'cold' or 'warm', "
                             f"got {self.init_mode!r}")


@dataclass
class BoundaryState:
    """Shared-variable copies and multiplier for one boundary, at iteration k."""
    index: int
    phi_left: np.ndarray    # MW per unit, left side's coupling-hour output
    phi_right: np.ndarray   # MW per unit, right side's hour-1 output
    lam: np.ndarray         # $/MW per unit
    iteration: int = 0

    @property
    def mismatch(self):
        return float(np.max(np.abs(self.phi_left - self.phi_right)))


@dataclass
class TraceRow:
    iteration: int
    max_mismatch_mw: float
    cost_usd: float
    boundary_mismatch_mw: np.ndarray = field(repr=False)
    wall_time_s: float = 0.0


@dataclass
class ConvergenceTrace:
    rows: list[TraceRow] = field(default_factory=list)
    eps: float = 0.0
    converged: bool = False

    @property
    def iterations(self):
        return len(self.rows)

    @property
    def solve_time_s(self):
        return sum(r.wall_time_s for r in self.rows)

    def write_csv(self, path):
        n_b = len(self.rows[0].boundary_mismatch_mw) if self.rows else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "max_mismatch_mw", "cost_usd"]
                       + [f"boundary_{b + 1}_mismatch" for b in range(n_b)])
            for r in self.rows:
                w.writerow([r.iteration, repr(r.max_mismatch_mw), repr(r.cost_usd)]
                           + [repr(float(v)) for v in r.boundary_mismatch_mw])


def augment_subproblem(base: QuadraticProgram, sub: SubHorizon,
                       left_state: BoundaryState | None,
                       right_state: BoundaryState | None,
                       config: AppConfig, n_units: int) -> QuadraticProgram:
    """Add proximal, cross, and multiplier terms for the sub-horizon's boundaries.

    Right boundary (this block owns the coupling hour, phi = its coupling-hour
    generation): (rho/2)||phi - phi_left*||^2 + gamma phi'(phi_left* - phi_right*)
    - lam'phi. Left boundary (phi = its hour-1 generation): same proximal form
    centered on phi_right*, with the cross difference and multiplier sign
    flipped. The multiplier convention pairs with the ascent step
    lam += alpha (phi_right - phi_left). Constants are dropped; only H's
    diagonal and c change.
    """
    rho, gamma = config.rho, config.gamma
    h_delta = np.zeros(base.n)
    c = base.c.copy()
    if right_state is not None:
        if not sub.has_right_boundary:
            raise ValueError(f"sub-horizon {sub.index} has no right boundary")
        s = right_state
        if s.phi_left.shape != (n_units,):
            raise ValueError("boundary state length does not match unit count")
        i = base.n - n_units  # coupling hour is the last local interval
        h_delta[i:] += rho
        c[i:] += -rho * s.phi_left + gamma * (s.phi_left - s.phi_right) - s.lam
    if left_state is not None:
        if not sub.has_left_boundary:
            raise ValueError(f"sub-horizon {sub.index} has no left boundary")
        s = left_state
        if s.phi_right.shape != (n_units,):
            raise ValueError("boundary state length does not match unit count")
        h_delta[:n_units] += rho
        c[:n_units] += (-rho * s.phi_right + gamma * (s.phi_right - s.phi_left)
                        + s.lam)
    h = base.H if not h_delta.any() else base.H + sp.diags(h_delta, format="csc")
    return QuadraticProgram(H=h, c=c, A_eq=base.A_eq, b_eq=base.b_eq,
                            A_in=base.A_in, b_in=base.b_in,
                            lower=base.lower, upper=base.upper, labels=base.labels)


def update_multipliers(state: BoundaryState, alpha: float) -> BoundaryState:
    """Dual ascent on the consistency constraint between the two copies.

    The subproblem objectives carry -lam'phi_left and +lam'phi_right, so the
    ascent direction is the signed mismatch (phi_right - phi_left): when the
    left copy runs high, lam falls, which penalizes the left copy and
    subsidizes the right one on the next pass.
    """
    return BoundaryState(index=state.index,
                         phi_left=state.phi_left,
                         phi_right=state.phi_right,
                         lam=state.lam + alpha * (state.phi_right - state.phi_left),
                         iteration=state.iteration + 1)


def check_convergence(states: list[BoundaryState], eps: float):
    """(converged, max mismatch MW) over all boundaries and units."""
    if not states:
        return True, 0.0
    worst = max(s.mismatch for s in states)
    return worst <= eps, worst


def _worker_count(config: AppConfig, n_tasks: int) -> int:
    if config.n_workers is not None:
        n = config.n_workers
    else:
        env = os.environ.get("ED_THREADS")
        n = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n, n_tasks))


def _run_parallel(jobs, n_workers: int):
    """Run independent zero-argument solve jobs; results ordered by index."""
    if n_workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


def _extract(sol: qpmod.QpSolution, spec: EdProblemSpec, sub: SubHorizon):
    if sol.status == qpmod.INFEASIBLE:
        raise InfeasibleDispatch(f"sub-horizon {sub.index + 1} subproblem is infeasible")
    return sol.x.reshape(spec.n_t, spec.n_g).T


def initialize(mode: str, subs: list[SubHorizon], case: GridCase,
               network: NetworkModel, scenario: ScenarioData,
               config: AppConfig):
    """Initial boundary states; (states, per-sub generation or None, solve seconds).

    Cold: all shared variables and multipliers at zero. Warm: drop the
    coupling intervals, solve the now-independent sub-horizons in parallel,
    and seed each boundary with the left side's last-real-hour output and the
    right side's hour-1 output. The warm solves count as one reported
    iteration.
    """
    n_g = case.n_gens
    zeros = lambda: np.zeros(n_g)
    if mode == "cold":
        states = [BoundaryState(index=b, phi_left=zeros(), phi_right=zeros(),
                                lam=zeros())
                  for b in range(len(subs) - 1)]
        return states, None, 0.0

    specs = [build_subproblem_spec(s, case, network, scenario,
                                   include_coupling=False) for s in subs]
    qps = [assemble_ed_qp(sp_) for sp_ in specs]
    t0 = time.perf_counter()
    sols = _run_parallel([partial(solve_qp, q) for q in qps],
                         _worker_count(config, len(qps)))
    wall = time.perf_counter() - t0
    gens = [_extract(sol, spec, sub) for sol, spec, sub in zip(sols, specs, subs)]
    states = [BoundaryState(index=b,
                            phi_left=gens[b][:, -1].copy(),
                            phi_right=gens[b + 1][:, 0].copy(),
                            lam=zeros())
              for b in range(len(subs) - 1)]
    return states, gens, wall


def _consolidate(gens, subs, n_intervals, n_g):
    """Stitch the real intervals of every sub-horizon into one schedule."""
    full = np.empty((n_g, n_intervals))
    for sub, g in zip(subs, gens):
        full[:, sub.start:sub.stop] = g[:, :sub.n_real]
    return full


def run_app(case: GridCase, network: NetworkModel, scenario: ScenarioData,
            n_sub: int, config: AppConfig | None = None):
    """Coordinate the decomposed dispatch; returns (DispatchSchedule, trace).

    `n_sub == 1` degenerates to the centralized solve with an empty trace.
    On hitting max_iter the best (last) iterate is still consolidated and
    feasibility-checked, with the schedule status flagged.
    """
    config = (config or AppConfig()).resolved(case)
    if n_sub == 1:
        schedule = solve_centralized(case, network, scenario)
        schedule.status = STATUS_CONVERGED
        return schedule, ConvergenceTrace(rows=[], eps=config.eps, converged=True)

    subs = split_horizon(scenario.n_intervals, n_sub)
    specs = [build_subproblem_spec(s, case, network, scenario) for s in subs]
    base_qps = [assemble_ed_qp(sp_) for sp_ in specs]
    # the coordination loop only ever changes objective data, so each
    # subproblem keeps one solver workspace across all iterations
    solvers = [qpmod.PersistentQpSolver(q) for q in base_qps]
    n_g = case.n_gens
    trace = ConvergenceTrace(rows=[], eps=config.eps)

    states, gens, wall = initialize(config.init_mode, subs, case, network,
                                    scenario, config)
    converged = False
    if gens is not None:  # warm: the initialization solves are iteration 1
        converged, worst = check_convergence(states, config.eps)
        cost = evaluate_cost(_consolidate(gens, subs, scenario.n_intervals, n_g), case)
        trace.rows.append(TraceRow(
            iteration=1, max_mismatch_mw=worst, cost_usd=cost,
            boundary_mismatch_mw=np.array([s.mismatch for s in states]),
            wall_time_s=wall))

    while not converged and trace.iterations < config.max_iter:
        if trace.rows:
            states = [update_multipliers(s, config.alpha) for s in states]
        qps = [augment_subproblem(
                   base, sub,
                   left_state=states[sub.index - 1] if sub.has_left_boundary else None,
                   right_state=states[sub.index] if sub.has_right_boundary else None,
                   config=config, n_units=n_g)
               for base, sub in zip(base_qps, subs)]
        t0 = time.perf_counter()
        sols = _run_parallel([partial(ps.solve, q) for ps, q in zip(solvers, qps)],
                             _worker_count(config, len(qps)))
        wall = time.perf_counter() - t0
        gens = [_extract(sol, spec, sub) for sol, spec, sub in zip(sols, specs, subs)]
        states = [BoundaryState(index=s.index,
                                phi_left=gens[s.index][:, -1].copy(),
                                phi_right=gens[s.index + 1][:, 0].copy(),
                                lam=s.lam, iteration=s.iteration)
                  for s in states]
        converged, worst = check_convergence(states, config.eps)
        cost = evaluate_cost(_consolidate(gens, subs, scenario.n_intervals, n_g), case)
        trace.rows.append(TraceRow(
            iteration=trace.iterations + 1, max_mismatch_mw=worst, cost_usd=cost,
            boundary_mismatch_mw=np.array([s.mismatch for s in states]),
            wall_time_s=wall))

    trace.converged = converged
    generation = _consolidate(gens, subs, scenario.n_intervals, n_g)
    flows = (network.gen_shift() @ generation
             - network.load_shift() @ scenario.demand) if case.n_branches else \
        np.zeros((0, scenario.n_intervals))
    schedule = DispatchSchedule(
        generation=generation, flows=flows,
        production_cost=evaluate_cost(generation, case),
        status=STATUS_CONVERGED if converged else STATUS_MAX_ITER,
        feasibility=check_feasibility(
            generation, case, network, scenario,
            ramp_slack_mw=config.eps,
            slack_transitions=[s.stop - 1 for s in subs[:-1]]))
    return schedule, trace
