"""Deterministic synthetic benchmark cases with a weekly demand shape.

Stand-in for confidential/unpublished utility data: a connected random
network, quadratic-cost units sized to cover peak demand plus reserve, and a
daily load-template demand profile with a weekday/weekend factor. Every case is
feasible by construction: a proportional-share dispatch satisfies all
constraints, and ramp rates and line limits are sized around it.
"""

from __future__ import annotations

import numpy as np

from .case import Branch, Generator, GridCase, Load, ScenarioData
from .network import build_network

_DAY_HOURS = 24
_WEEKEND_FACTOR = 0.82
_CAPACITY_MARGIN = 1.4
_RESERVE_FRACTION = 0.05


# typical utility day: overnight trough, afternoon climb, evening peak. The
# last hour nearly rejoins the first so day boundaries carry little load
# movement, as in real profiles where midnight sits on the flat overnight
# shoulder.
_DAILY_TEMPLATE = np.array([
    0.540, 0.520, 0.505, 0.500, 0.500, 0.520,
    0.580, 0.670, 0.750, 0.800, 0.840, 0.860,
    0.870, 0.880, 0.890, 0.910, 0.940, 0.980,
    1.000, 0.970, 0.910, 0.820, 0.680, 0.542,
])


def _weekly_shape(horizon):
    """Per-hour multiplier: daily template x weekday/weekend factor.

    The weekend factor ramps down over Friday evening and back up over
    Sunday evening, completing before midnight, so every day boundary sits
    on a plateau of the weekly factor.
    """
    week = np.tile(_DAILY_TEMPLATE, 7)
    factor = np.ones(7 * _DAY_HOURS)
    factor[5 * _DAY_HOURS:] = _WEEKEND_FACTOR
    blend = 0.5 * (1.0 - np.cos(np.pi * np.arange(1, 9) / 8.0))  # 0 -> 1
    factor[112:120] = 1.0 + (_WEEKEND_FACTOR - 1.0) * blend      # Friday evening
    factor[160:168] = _WEEKEND_FACTOR + (1.0 - _WEEKEND_FACTOR) * blend  # Sunday
    return np.resize(week * factor, horizon)


def generate_synthetic_case(n_buses: int, seed: int, horizon: int):
    """Build a (GridCase, ScenarioData) pair, a pure function of its arguments."""
    if n_buses < 2:
        raise ValueError(f"need at least 2 buses, got {n_buses}")
    if horizon < 2:
        raise ValueError(f"need at least 2 intervals, got {horizon}")
    rng = np.random.default_rng(seed)
    buses = tuple(f"b{i + 1}" for i in range(n_buses))

    # random spanning tree plus extra corridors for meshing
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n_buses)]
    seen = {tuple(sorted(e)) for e in edges}
    n_extra = int(round(0.58 * n_buses))
    attempts = 0
    while n_extra > 0 and attempts < 20 * n_buses:
        attempts += 1
        i, j = rng.integers(0, n_buses, size=2)
        key = (min(i, j), max(i, j))
        if i == j or key in seen:
            continue
        seen.add(key)
        edges.append((int(key[0]), int(key[1])))
        n_extra -= 1
    reactances = rng.uniform(0.02, 0.2, size=len(edges))

    # loads and units
    n_loads = max(1, int(round(0.77 * n_buses)))
    load_buses = rng.choice(n_buses, size=n_loads, replace=n_loads > n_buses)
    if n_buses >= 10:
        n_gens = max(2, int(round(0.46 * n_buses)))
    else:
        n_gens = int(rng.integers(2, 5))
    gen_buses = rng.choice(n_buses, size=n_gens, replace=n_gens > n_buses)

    shape = _weekly_shape(horizon)
    load_base = rng.uniform(20.0, 80.0, size=n_loads)
    demand = load_base[:, None] * shape[None, :]
    total = demand.sum(axis=0)
    reserve = _RESERVE_FRACTION * total

    raw_cap = rng.uniform(0.5, 1.5, size=n_gens)
    p_max = raw_cap / raw_cap.sum() * _CAPACITY_MARGIN * float((total + reserve).max())
    share_w = p_max / p_max.sum()
    proportional = share_w[:, None] * total[None, :]  # feasible reference dispatch

    # hourly ramp rates are generous relative to load movement, as for a
    # thermal fleet at hourly resolution: they bind during the steepest
    # demand swings but not on the flat overnight shoulders
    step = np.abs(np.diff(proportional, axis=1)).max(axis=1)
    ramp = np.maximum(6.0 * step, 0.12 * p_max)
    cost_a = rng.uniform(0.01, 0.05, size=n_gens)
    cost_b = rng.uniform(5.0, 40.0, size=n_gens)
    cost_c = rng.uniform(0.0, 300.0, size=n_gens)

    generators = tuple(
        Generator(id=f"g{u + 1}", bus=buses[gen_buses[u]],
                  p_min=0.0, p_max=float(p_max[u]),
                  cost_a=float(cost_a[u]), cost_b=float(cost_b[u]),
                  cost_c=float(cost_c[u]),
                  ramp_up=float(ramp[u]), ramp_down=float(ramp[u]))
        for u in range(n_gens))
    loads = tuple(Load(id=f"d{j + 1}", bus=buses[load_buses[j]])
                  for j in range(n_loads))
    branches = tuple(
        Branch(id=f"l{k + 1}", from_bus=buses[i], to_bus=buses[j],
               reactance=float(reactances[k]), flow_limit=1.0)  # resized below
        for k, (i, j) in enumerate(edges))

    case = GridCase(base_mva=100.0, buses=buses, slack_bus=buses[0],
                    branches=branches, generators=generators, loads=loads)

    # size line limits so the proportional dispatch always fits
    net = build_network(case)
    flows = net.gen_shift() @ proportional - net.load_shift() @ demand
    limits = 2.0 * np.abs(flows).max(axis=1) + 10.0
    branches = tuple(
        Branch(id=br.id, from_bus=br.from_bus, to_bus=br.to_bus,
               reactance=br.reactance, flow_limit=float(limits[k]))
        for k, br in enumerate(branches))
    case = GridCase(base_mva=100.0, buses=buses, slack_bus=buses[0],
                    branches=branches, generators=generators, loads=loads)
    scenario = ScenarioData(n_intervals=horizon, demand=demand, reserve=reserve)
    return case, scenario
