"""Multi-interval economic dispatch: QP assembly, centralized solve, checks.

Variables are generator outputs in MW, interval-major (all units of the
first interval, then the second, ...). Line flows are eliminated through the
shift factors; nodal balance collapses to one system-wide equality per
interval, which leaves an identical feasible set for DC dispatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import qp as qpmod
from .case import GridCase, ScenarioData
from .network import NetworkModel
from .qp import QuadraticProgram, solve_qp


class InfeasibleDispatch(RuntimeError):
    """Raised when a dispatch QP has no feasible point."""


@dataclass
class EdProblemSpec:
    """One contiguous dispatch problem: a slice of the horizon plus options.

    `weights` switches each interval's production cost on (1) or off (0);
    `ramp_anchor` (MW per unit, NaN = unconstrained) makes the ramp limits
    bind between a fixed pre-horizon operating point and the first interval.
    """
    case: GridCase
    network: NetworkModel
    intervals: np.ndarray          # global interval indices, 0-based, contiguous
    demand: np.ndarray             # [n_loads, len(intervals)] MW
    weights: np.ndarray | None = None
    ramp_anchor: np.ndarray | None = None

    def __post_init__(self):
        self.intervals = np.asarray(self.intervals, dtype=int)
        if self.intervals.size == 0:
            raise ValueError("spec needs at least one interval")
        if np.any(np.diff(self.intervals) != 1):
            raise ValueError("spec intervals must be contiguous")
        self.demand = np.asarray(self.demand, dtype=float)
        if self.demand.shape != (self.case.n_loads, self.intervals.size):
            raise ValueError(f"demand shape {self.demand.shape} does not match "
                             f"({self.case.n_loads}, {self.intervals.size})")
        if self.weights is None:
            self.weights = np.ones(self.intervals.size)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.intervals.size,):
            raise ValueError("weights length does not match intervals")
        if self.ramp_anchor is not None:
            self.ramp_anchor = np.asarray(self.ramp_anchor, dtype=float)
            if self.ramp_anchor.shape != (self.case.n_gens,):
                raise ValueError("ramp_anchor length must equal the unit count")

    @property
    def n_t(self):
        return self.intervals.size

    @property
    def n_g(self):
        return self.case.n_gens

    def var_index(self, t_local, u):
        return t_local * self.n_g + u


def _flow_envelope(gen_shift, p_min, p_max, total_demand):
    """Achievable range of `gen_shift @ p` under balance and box constraints only.

    For each branch, the extreme of the weighted sum subject to
    sum(p) = D and p_min <= p <= p_max is a continuous knapsack: start every
    unit at its minimum and hand the remaining energy to the largest (or
    smallest) coefficients first. Ramp and other flow limits are ignored, so
    the range is a valid relaxation bound: any flow constraint that cannot be
    violated inside it is redundant and can be dropped from the QP.

    Returns (hi, lo), each [n_branches x n_t] in MW.
    """
    remaining = np.asarray(total_demand, dtype=float) - p_min.sum()
    caps = p_max - p_min
    hi = np.empty((gen_shift.shape[0], remaining.size))
    lo = np.empty_like(hi)
    for l, coef in enumerate(gen_shift):
        base = float(coef @ p_min)
        for sign, out in ((1.0, hi), (-1.0, lo)):
            order = np.argsort(-sign * coef)
            cum = np.concatenate([[0.0], np.cumsum(caps[order])])
            val = np.concatenate([[0.0], np.cumsum(coef[order] * caps[order])])
            out[l] = base + np.interp(remaining, cum, val)
    return hi, lo


def assemble_ed_qp(spec: EdProblemSpec) -> QuadraticProgram:
    """Assemble the dispatch QP for a spec: cost, balance, flows, bounds, ramps."""
    case, net = spec.case, spec.network
    n_g, n_t = spec.n_g, spec.n_t
    n = n_g * n_t
    a = case.gen_array("cost_a")
    b = case.gen_array("cost_b")
    ur = case.gen_array("ramp_up")
    dr = case.gen_array("ramp_down")

    h_diag = np.concatenate([2.0 * a * w for w in spec.weights])
    c = np.concatenate([b * w for w in spec.weights])
    lower = np.tile(case.gen_array("p_min"), n_t)
    upper = np.tile(case.gen_array("p_max"), n_t)

    # per-interval system balance
    eq_rows = sp.kron(sp.identity(n_t, format="csr"),
                      sp.csr_matrix(np.ones((1, n_g))), format="csc")
    eq_rhs = spec.demand.sum(axis=0)

    in_blocks, in_rhs = [], []

    # ramping between consecutive intervals of the spec
    if n_t > 1:
        diff = sp.kron(
            sp.diags([np.ones(n_t - 1), -np.ones(n_t - 1)], [1, 0],
                     shape=(n_t - 1, n_t), format="csr"),
            sp.identity(n_g, format="csr"), format="csr")
        in_blocks += [diff, -diff]
        in_rhs += [np.tile(ur, n_t - 1), np.tile(dr, n_t - 1)]

    # ramping from the anchor into the first interval
    if spec.ramp_anchor is not None:
        anchored = np.flatnonzero(np.isfinite(spec.ramp_anchor))
        if anchored.size:
            eye = sp.identity(n, format="csr")[anchored]
            in_blocks += [eye, -eye]
            in_rhs += [ur[anchored] + spec.ramp_anchor[anchored],
                       dr[anchored] - spec.ramp_anchor[anchored]]

    # |SF (K_P p - K_D D)| <= limit, per branch and interval; rows that can
    # never bind under the balance/box relaxation are screened out up front
    if case.n_branches:
        gen_shift = net.gen_shift()          # [branch x gen]
        load_flow = net.load_shift() @ spec.demand  # [branch x t]
        limits = np.array([br.flow_limit for br in case.branches])
        hi_env, lo_env = _flow_envelope(gen_shift, case.gen_array("p_min"),
                                        case.gen_array("p_max"),
                                        spec.demand.sum(axis=0))
        keep_hi = ((hi_env - load_flow) > limits[:, None]).T.ravel()
        keep_lo = ((lo_env - load_flow) < -limits[:, None]).T.ravel()
        flow = sp.kron(sp.identity(n_t, format="csr"),
                       sp.csr_matrix(gen_shift), format="csr")
        rhs_hi = (limits[:, None] + load_flow).T.ravel()
        rhs_lo = (limits[:, None] - load_flow).T.ravel()
        if keep_hi.any():
            in_blocks.append(flow[keep_hi])
            in_rhs.append(rhs_hi[keep_hi])
        if keep_lo.any():
            in_blocks.append(-flow[keep_lo])
            in_rhs.append(rhs_lo[keep_lo])

    if in_blocks:
        a_in = sp.vstack(in_blocks, format="csc")
        b_in = np.concatenate(in_rhs)
    else:
        a_in, b_in = None, None

    labels = [(g.id, int(t_glob) + 1)
              for t_glob in spec.intervals for g in case.generators]
    return QuadraticProgram(H=sp.diags(h_diag, format="csc"), c=c,
                            A_eq=eq_rows, b_eq=eq_rhs,
                            A_in=a_in, b_in=b_in,
                            lower=lower, upper=upper, labels=labels)


def evaluate_cost(generation, case: GridCase, weights=None) -> float:
    """Production cost ($) of a [unit x interval] MW schedule, per-interval weighted."""
    p = np.atleast_2d(np.asarray(generation, dtype=float))
    n_t = p.shape[1]
    if p.shape[0] != case.n_gens:
        raise ValueError(f"generation has {p.shape[0]} rows, expected {case.n_gens}")
    w = np.ones(n_t) if weights is None else np.asarray(weights, dtype=float)
    a = case.gen_array("cost_a")[:, None]
    b = case.gen_array("cost_b")[:, None]
    c = case.gen_array("cost_c")[:, None]
    per_interval = (a * p ** 2 + b * p + c).sum(axis=0)
    return float(per_interval @ w)


@dataclass
class FeasibilityReport:
    """Max violation in MW per constraint class."""
    balance: float
    bounds: float
    ramp: float
    flow: float
    tol_mw: float
    ramp_excess: np.ndarray | None = field(default=None, repr=False)  # [unit x transition]

    @property
    def ok(self):
        return max(self.balance, self.bounds, self.ramp, self.flow) <= self.tol_mw


def check_feasibility(generation, case: GridCase, network: NetworkModel,
                      scenario: ScenarioData, tol_pu=1e-4,
                      ramp_slack_mw=0.0, slack_transitions=None) -> FeasibilityReport:
    """Re-evaluate every dispatch constraint on a full-horizon schedule.

    `ramp_slack_mw` widens the ramp limits at the transitions listed in
    `slack_transitions` (all transitions when None). A schedule stitched
    together from coordinated sub-horizons is only boundary-consistent to the
    coordination tolerance, so its cross-boundary ramps legitimately carry
    that much slack; `ramp_excess` always reports the raw, slack-free values.
    """
    p = np.asarray(generation, dtype=float)
    if p.shape != (case.n_gens, scenario.n_intervals):
        raise ValueError(f"generation shape {p.shape} does not match "
                         f"({case.n_gens}, {scenario.n_intervals})")
    tol_mw = tol_pu * case.base_mva

    balance = float(np.max(np.abs(p.sum(axis=0) - scenario.total_demand())))
    p_min = case.gen_array("p_min")[:, None]
    p_max = case.gen_array("p_max")[:, None]
    bounds = float(np.max(np.maximum(p_min - p, p - p_max), initial=0.0))

    ur = case.gen_array("ramp_up")[:, None]
    dr = case.gen_array("ramp_down")[:, None]
    steps = [(p[:, 1:] - p[:, :-1])] if p.shape[1] > 1 else []
    ramp_excess = None
    ramp = 0.0
    if steps:
        d = steps[0]
        ramp_excess = np.maximum(d - ur, -d - dr)
        slack = np.zeros(d.shape[1])
        if ramp_slack_mw:
            if slack_transitions is None:
                slack[:] = ramp_slack_mw
            else:
                slack[np.asarray(slack_transitions, dtype=int)] = ramp_slack_mw
        ramp = float(np.max(ramp_excess - slack[None, :], initial=0.0))
    anchor = case.gen_array("p_initial")
    anchored = np.flatnonzero(np.isfinite(anchor))
    if anchored.size:
        d0 = p[anchored, 0] - anchor[anchored]
        ramp = max(ramp, float(np.max(np.maximum(d0 - ur[anchored, 0],
                                                 -d0 - dr[anchored, 0]), initial=0.0)))
    flow = 0.0
    if case.n_branches:
        flows = network.gen_shift() @ p - network.load_shift() @ scenario.demand
        limits = np.array([br.flow_limit for br in case.branches])[:, None]
        flow = float(np.max(np.abs(flows) - limits, initial=0.0))
    return FeasibilityReport(balance=balance, bounds=max(bounds, 0.0),
                             ramp=max(ramp, 0.0), flow=max(flow, 0.0),
                             tol_mw=tol_mw, ramp_excess=ramp_excess)


@dataclass
class DispatchSchedule:
    generation: np.ndarray = field(repr=False)  # [unit x interval] MW
    flows: np.ndarray = field(repr=False)       # [branch x interval] MW
    production_cost: float
    status: str
    feasibility: FeasibilityReport | None = None


def solve_spec(spec: EdProblemSpec, feas_tol=1e-7, opt_tol=1e-7,
               max_iter=200) -> tuple[np.ndarray, qpmod.QpSolution]:
    """Solve one spec's QP; returns the [unit x interval] schedule and raw solution."""
    problem = assemble_ed_qp(spec)
    sol = solve_qp(problem, feas_tol=feas_tol, opt_tol=opt_tol, max_iter=max_iter)
    if sol.status == qpmod.INFEASIBLE:
        raise InfeasibleDispatch(
            f"dispatch over intervals {spec.intervals[0] + 1}..{spec.intervals[-1] + 1} "
            f"is infeasible (balance/bounds/ramp/flow constraints cannot all hold)")
    generation = sol.x.reshape(spec.n_t, spec.n_g).T
    return generation, sol


def solve_centralized(case: GridCase, network: NetworkModel,
                      scenario: ScenarioData) -> DispatchSchedule:
    """Benchmark solve: one QP over the whole horizon."""
    anchor = case.gen_array("p_initial")
    spec = EdProblemSpec(
        case=case, network=network,
        intervals=np.arange(scenario.n_intervals),
        demand=scenario.demand,
        ramp_anchor=anchor if np.any(np.isfinite(anchor)) else None)
    generation, sol = solve_spec(spec)
    flows = (network.gen_shift() @ generation
             - network.load_shift() @ scenario.demand) if case.n_branches else \
        np.zeros((0, scenario.n_intervals))
    return DispatchSchedule(
        generation=generation, flows=flows,
        production_cost=evaluate_cost(generation, case),
        status=sol.status,
        feasibility=check_feasibility(generation, case, network, scenario))
