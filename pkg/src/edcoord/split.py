"""Horizon decomposition: equal sub-horizons joined by coupling intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import GridCase, ScenarioData
from .dispatch import EdProblemSpec
from .network import NetworkModel


@dataclass(frozen=True)
class SubHorizon:
    """A contiguous block of real intervals, plus one trailing coupling interval
    (a copy of the next block's first hour) for every block except the last.

    Interval indices are global and 0-based; `start`..`stop` is half-open.
    """
    index: int
    start: int
    stop: int
    coupling_interval: int | None

    @property
    def real_intervals(self):
        return np.arange(self.start, self.stop)

    @property
    def n_real(self):
        return self.stop - self.start

    @property
    def has_left_boundary(self):
        return self.index > 0

    @property
    def has_right_boundary(self):
        return self.coupling_interval is not None


def split_horizon(n_intervals: int, n_sub: int) -> list[SubHorizon]:
    """Split the horizon into `n_sub` equal sub-horizons.

    Unequal splits are rejected: with parallel subproblem solves, the largest
    block dictates the wall time, so equal blocks are the only sensible plan.
    """
    if n_sub < 1:
        raise ValueError(f"need at least one sub-horizon, got {n_sub}")
    if n_intervals < n_sub:
        raise ValueError(f"cannot split {n_intervals} intervals into {n_sub} sub-horizons")
    if n_intervals % n_sub != 0:
        raise ValueError(f"{n_intervals} intervals are not divisible into {n_sub} "
                         f"equal sub-horizons; choose a divisor of {n_intervals}")
    size = n_intervals // n_sub
    subs = []
    for i in range(n_sub):
        start, stop = i * size, (i + 1) * size
        coupling = stop if i < n_sub - 1 else None
        subs.append(SubHorizon(index=i, start=start, stop=stop,
                               coupling_interval=coupling))
    return subs


def build_subproblem_spec(sub: SubHorizon, case: GridCase, network: NetworkModel,
                          scenario: ScenarioData,
                          include_coupling: bool = True) -> EdProblemSpec:
    """Dispatch spec for one sub-horizon.

    The coupling interval carries the neighbor's first-hour demand and all
    constraints (including the ramp from the last real hour into it) but zero
    cost weight: that physical hour is costed once, as the neighbor's hour 1.
    With `include_coupling=False` the sub-horizon is treated as independent
    (used by the warm-start initialization).
    """
    intervals = sub.real_intervals
    weights = np.ones(sub.n_real)
    if include_coupling and sub.coupling_interval is not None:
        intervals = np.append(intervals, sub.coupling_interval)
        weights = np.append(weights, 0.0)
    demand = scenario.demand[:, intervals]
    anchor = None
    if sub.index == 0:
        p_init = case.gen_array("p_initial")
        if np.any(np.isfinite(p_init)):
            anchor = p_init
    return EdProblemSpec(case=case, network=network, intervals=intervals,
                         demand=demand, weights=weights, ramp_anchor=anchor)


def split_plan_dict(subs: list[SubHorizon]) -> dict:
    """JSON-friendly description of a split (1-based intervals for reporting)."""
    return {
        "n_subhorizons": len(subs),
        "subhorizons": [
            {"index": s.index,
             "real_intervals": [s.start + 1, s.stop],
             "coupling_interval": None if s.coupling_interval is None
             else s.coupling_interval + 1}
            for s in subs
        ],
    }
