"""Grid case and demand scenario data: containers, validation, file I/O."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import networkx as nx
import numpy as np


class CaseError(ValueError):
    """Raised when a case or scenario file fails parsing or validation."""


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    reactance: float   # per-unit
    flow_limit: float  # MW

    def __post_init__(self):
        if self.reactance <= 0:
            raise CaseError(f"branch {self.id}: reactance must be > 0, got {self.reactance}")
        if self.flow_limit <= 0:
            raise CaseError(f"branch {self.id}: flow_limit must be > 0, got {self.flow_limit}")
        if self.from_bus == self.to_bus:
            raise CaseError(f"branch {self.id}: from_bus and to_bus are both {self.from_bus}")


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    p_min: float       # MW
    p_max: float       # MW
    cost_a: float      # $/MW^2 h
    cost_b: float      # $/MWh
    cost_c: float      # $/h
    ramp_up: float     # MW per interval
    ramp_down: float   # MW per interval
    p_initial: float | None = None

    def __post_init__(self):
        if not 0 <= self.p_min <= self.p_max:
            raise CaseError(f"generator {self.id}: need 0 <= p_min <= p_max, "
                            f"got ({self.p_min}, {self.p_max})")
        if self.cost_a < 0:
            raise CaseError(f"generator {self.id}: cost_a must be >= 0 for convexity")
        if self.ramp_up <= 0 or self.ramp_down <= 0:
            raise CaseError(f"generator {self.id}: ramp rates must be > 0")
        if self.p_initial is not None and not self.p_min <= self.p_initial <= self.p_max:
            raise CaseError(f"generator {self.id}: p_initial {self.p_initial} outside "
                            f"[{self.p_min}, {self.p_max}]")


@dataclass(frozen=True)
class Load:
    id: str
    bus: str


@dataclass(frozen=True)
class GridCase:
    base_mva: float
    buses: tuple[str, ...]
    slack_bus: str
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]

    def __post_init__(self):
        if self.base_mva <= 0:
            raise CaseError(f"base_mva must be > 0, got {self.base_mva}")
        if len(set(self.buses)) != len(self.buses):
            raise CaseError("bus ids are not unique")
        bus_set = set(self.buses)
        if self.slack_bus not in bus_set:
            raise CaseError(f"slack_bus {self.slack_bus!r} not in bus list")
        if not self.generators:
            raise CaseError("case has no generators")
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in bus_set:
                    raise CaseError(f"branch {br.id}: endpoint {end!r} is not a bus")
        for g in self.generators:
            if g.bus not in bus_set:
                raise CaseError(f"generator {g.id}: bus {g.bus!r} is not a bus")
        for ld in self.loads:
            if ld.bus not in bus_set:
                raise CaseError(f"load {ld.id}: bus {ld.bus!r} is not a bus")
        for coll, what in ((self.branches, "branch"), (self.generators, "generator"),
                           (self.loads, "load")):
            ids = [x.id for x in coll]
            if len(set(ids)) != len(ids):
                raise CaseError(f"{what} ids are not unique")
        g = nx.Graph()
        g.add_nodes_from(self.buses)
        g.add_edges_from((br.from_bus, br.to_bus) for br in self.branches)
        if not nx.is_connected(g):
            raise CaseError("branch graph is not connected")

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_gens(self):
        return len(self.generators)

    @property
    def n_loads(self):
        return len(self.loads)

    @property
    def n_branches(self):
        return len(self.branches)

    def bus_index(self):
        return {b: i for i, b in enumerate(self.buses)}

    def gen_array(self, name):
        """Per-generator attribute as a float array (p_initial -> NaN when absent)."""
        vals = [getattr(g, name) for g in self.generators]
        if name == "p_initial":
            vals = [np.nan if v is None else v for v in vals]
        return np.asarray(vals, dtype=float)


@dataclass(frozen=True)
class ScenarioData:
    n_intervals: int
    demand: np.ndarray   # [n_loads, n_intervals] MW
    reserve: np.ndarray  # [n_intervals] MW

    def __post_init__(self):
        demand = np.asarray(self.demand, dtype=float)
        reserve = np.asarray(self.reserve, dtype=float)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "reserve", reserve)
        if demand.ndim != 2 or demand.shape[1] != self.n_intervals:
            raise CaseError(f"demand shape {demand.shape} does not match "
                            f"n_intervals={self.n_intervals}")
        if reserve.shape != (self.n_intervals,):
            raise CaseError(f"reserve shape {reserve.shape} does not match "
                            f"n_intervals={self.n_intervals}")
        if np.any(demand < 0):
            raise CaseError("demand has negative entries")
        if np.any(reserve < 0):
            raise CaseError("reserve has negative entries")

    def total_demand(self):
        """System demand per interval, MW."""
        return self.demand.sum(axis=0)


@dataclass(frozen=True)
class ReserveReport:
    """Per-interval capacity-adequacy check: sum(p_max) >= demand + reserve."""
    interval_ok: np.ndarray = field(repr=False)
    margin_mw: np.ndarray = field(repr=False)

    @property
    def ok(self):
        return bool(np.all(self.interval_ok))

    def failing_intervals(self):
        return np.flatnonzero(~self.interval_ok)


def validate_reserve(case: GridCase, scenario: ScenarioData) -> ReserveReport:
    """Check that total generating capacity covers demand plus reserve each interval.

    With every unit always online this is a pure data check, not a
    constraint of the dispatch QP.
    """
    cap = case.gen_array("p_max").sum()
    need = scenario.total_demand() + scenario.reserve
    margin = cap - need
    return ReserveReport(interval_ok=margin >= 0, margin_mw=margin)


# ---------------------------------------------------------------------------
# file I/O

def _require(d, key, where):
    if key not in d:
        raise CaseError(f"{where}: missing required field {key!r}")
    return d[key]


def case_from_dict(data: dict) -> GridCase:
    if not isinstance(data, dict):
        raise CaseError("case file: top level must be a JSON object")
    try:
        branches = tuple(
            Branch(id=str(_require(b, "id", f"branches[{i}]")),
                   from_bus=str(_require(b, "from", f"branches[{i}]")),
                   to_bus=str(_require(b, "to", f"branches[{i}]")),
                   reactance=float(_require(b, "x", f"branches[{i}]")),
                   flow_limit=float(_require(b, "limit_mw", f"branches[{i}]")))
            for i, b in enumerate(_require(data, "branches", "case"))
        )
        generators = tuple(
            Generator(id=str(_require(g, "id", f"generators[{i}]")),
                      bus=str(_require(g, "bus", f"generators[{i}]")),
                      p_min=float(_require(g, "p_min", f"generators[{i}]")),
                      p_max=float(_require(g, "p_max", f"generators[{i}]")),
                      cost_a=float(_require(g, "a", f"generators[{i}]")),
                      cost_b=float(_require(g, "b", f"generators[{i}]")),
                      cost_c=float(_require(g, "c", f"generators[{i}]")),
                      ramp_up=float(_require(g, "ramp_up", f"generators[{i}]")),
                      ramp_down=float(_require(g, "ramp_down", f"generators[{i}]")),
                      p_initial=(None if g.get("p_initial") is None
                                 else float(g["p_initial"])))
            for i, g in enumerate(_require(data, "generators", "case"))
        )
        loads = tuple(
            Load(id=str(_require(l, "id", f"loads[{i}]")),
                 bus=str(_require(l, "bus", f"loads[{i}]")))
            for i, l in enumerate(_require(data, "loads", "case"))
        )
        return GridCase(
            base_mva=float(_require(data, "base_mva", "case")),
            buses=tuple(str(b) for b in _require(data, "buses", "case")),
            slack_bus=str(_require(data, "slack_bus", "case")),
            branches=branches,
            generators=generators,
            loads=loads,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CaseError):
            raise
        raise CaseError(f"case file: malformed value ({exc})") from exc


def case_to_dict(case: GridCase) -> dict:
    return {
        "base_mva": case.base_mva,
        "slack_bus": case.slack_bus,
        "buses": list(case.buses),
        "branches": [{"id": b.id, "from": b.from_bus, "to": b.to_bus,
                      "x": b.reactance, "limit_mw": b.flow_limit}
                     for b in case.branches],
        "generators": [{k: v for k, v in
                        {"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
                         "a": g.cost_a, "b": g.cost_b, "c": g.cost_c,
                         "ramp_up": g.ramp_up, "ramp_down": g.ramp_down,
                         "p_initial": g.p_initial}.items()
                        if not (k == "p_initial" and v is None)}
                       for g in case.generators],
        "loads": [{"id": l.id, "bus": l.bus} for l in case.loads],
    }


def load_case(path) -> GridCase:
    """Load and validate a grid case from a JSON file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CaseError(f"cannot read case file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CaseError(f"case file {path}: invalid JSON at line {exc.lineno}: "
                        f"{exc.msg}") from exc
    return case_from_dict(data)


def save_case(case: GridCase, path):
    with open(path, "w") as fh:
        json.dump(case_to_dict(case), fh, indent=2)
        fh.write("\n")


def load_scenario(path, case: GridCase) -> ScenarioData:
    """Load a demand/reserve profile CSV against a case's declared loads.

    Expected header: interval,reserve_mw,<load ids...>; rows 1-based and
    contiguous in `interval`.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CaseError(f"cannot read scenario file {path}: {exc}") from exc
    if not rows:
        raise CaseError(f"scenario file {path} is empty")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["interval", "reserve_mw"]:
        raise CaseError(f"scenario file {path}: header must start with "
                        f"'interval,reserve_mw', got {header[:2]}")
    load_ids = [l.id for l in case.loads]
    file_ids = header[2:]
    missing = set(load_ids) - set(file_ids)
    extra = set(file_ids) - set(load_ids)
    if missing or extra:
        raise CaseError(f"scenario file {path}: load columns do not match case "
                        f"(missing {sorted(missing)}, unknown {sorted(extra)})")
    col_of = {lid: file_ids.index(lid) + 2 for lid in load_ids}

    body = [r for r in rows[1:] if r and any(cell.strip() for cell in r)]
    n_t = len(body)
    if n_t == 0:
        raise CaseError(f"scenario file {path}: no interval rows")
    demand = np.empty((len(load_ids), n_t))
    reserve = np.empty(n_t)
    for t, row in enumerate(body):
        if len(row) != len(header):
            raise CaseError(f"scenario file {path}, row {t + 2}: expected "
                            f"{len(header)} columns, got {len(row)}")
        try:
            interval = int(row[0])
            reserve[t] = float(row[1])
            for j, lid in enumerate(load_ids):
                demand[j, t] = float(row[col_of[lid]])
        except ValueError as exc:
            raise CaseError(f"scenario file {path}, row {t + 2}: {exc}") from exc
        if interval != t + 1:
            raise CaseError(f"scenario file {path}, row {t + 2}: intervals must be "
                            f"1-based and contiguous (expected {t + 1}, got {interval})")
    if np.any(demand < 0):
        raise CaseError(f"scenario file {path}: negative demand")
    return ScenarioData(n_intervals=n_t, demand=demand, reserve=reserve)


def save_scenario(scenario: ScenarioData, case: GridCase, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["interval", "reserve_mw"] + [l.id for l in case.loads])
        for t in range(scenario.n_intervals):
            w.writerow([t + 1, repr(float(scenario.reserve[t]))]
                       + [repr(float(v)) for v in scenario.demand[:, t]])
