"""DC network model: incidence matrices, shift factors, line-flow evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .case import GridCase, CaseError


@dataclass(frozen=True)
class NetworkModel:
    shift_factors: np.ndarray = field(repr=False)   # [branch x bus], dimensionless
    gen_incidence: np.ndarray = field(repr=False)   # [bus x gen], 0/1
    load_incidence: np.ndarray = field(repr=False)  # [bus x load], 0/1
    line_incidence: np.ndarray = field(repr=False)  # [bus x branch], +1 from / -1 to
    slack_bus: str
    base_mva: float

    @property
    def n_branches(self):
        return self.shift_factors.shape[0]

    @property
    def n_buses(self):
        return self.shift_factors.shape[1]

    def gen_shift(self):
        """Branch-flow sensitivity to generator outputs, SF @ K_P."""
        return self.shift_factors @ self.gen_incidence

    def load_shift(self):
        """Branch-flow sensitivity to load draws, SF @ K_D."""
        return self.shift_factors @ self.load_incidence


def build_network(case: GridCase) -> NetworkModel:
    """Build incidence matrices and the shift-factor matrix for a connected case.

    Shift factors come from branch susceptances b = 1/x and the nodal
    susceptance matrix reduced by the slack row/column; the slack column is
    identically zero. Dense linear algebra: fine at the scales handled here.
    """
    idx = case.bus_index()
    n_b, n_l = case.n_buses, case.n_branches

    k_p = np.zeros((n_b, case.n_gens))
    for j, g in enumerate(case.generators):
        k_p[idx[g.bus], j] = 1.0
    k_d = np.zeros((n_b, case.n_loads))
    for j, l in enumerate(case.loads):
        k_d[idx[l.bus], j] = 1.0
    k_l = np.zeros((n_b, n_l))
    susceptance = np.empty(n_l)
    for j, br in enumerate(case.branches):
        k_l[idx[br.from_bus], j] = 1.0
        k_l[idx[br.to_bus], j] = -1.0
        susceptance[j] = 1.0 / br.reactance

    # nodal susceptance matrix B = K_L diag(b) K_L^T, reduced at the slack
    b_full = k_l @ (susceptance[:, None] * k_l.T)
    slack = idx[case.slack_bus]
    keep = np.array([i for i in range(n_b) if i != slack])
    sf = np.zeros((n_l, n_b))
    if n_l:
        b_red = b_full[np.ix_(keep, keep)]
        bf = susceptance[:, None] * k_l.T  # flows = bf @ theta
        try:
            sf[:, keep] = np.linalg.solve(b_red.T, bf[:, keep].T).T
        except np.linalg.LinAlgError as exc:
            raise CaseError("reduced susceptance matrix is singular "
                            "(network disconnected or degenerate)") from exc
    return NetworkModel(shift_factors=sf, gen_incidence=k_p, load_incidence=k_d,
                        line_incidence=k_l, slack_bus=case.slack_bus,
                        base_mva=case.base_mva)


def line_flows(model: NetworkModel, gen_mw, demand_mw, balance_tol_pu=1e-6):
    """Branch flows (MW) for one interval of generation and demand.

    Requires generation and demand to balance within `balance_tol_pu` of the
    case base power.
    """
    gen_mw = np.asarray(gen_mw, dtype=float)
    demand_mw = np.asarray(demand_mw, dtype=float)
    imbalance = gen_mw.sum() - demand_mw.sum()
    if abs(imbalance) > balance_tol_pu * model.base_mva:
        raise ValueError(f"generation/demand imbalance {imbalance:.6g} MW exceeds "
                         f"tolerance {balance_tol_pu * model.base_mva:.3g} MW")
    injections = model.gen_incidence @ gen_mw - model.load_incidence @ demand_mw
    return model.shift_factors @ injections
