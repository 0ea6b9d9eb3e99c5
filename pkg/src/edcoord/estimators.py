"""Estimator-style front ends for the dispatch solvers.

Hyperparameters live in ``__init__`` and are inspectable via ``get_params``;
``fit(case, scenario)`` runs the solve and exposes results as trailing-
underscore attributes, so the solvers compose with ecosystem tooling such as
parameter grids.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .case import GridCase, ScenarioData, validate_reserve
from .coordinator import AppConfig, run_app
from .dispatch import solve_centralized
from .network import build_network


def _check_inputs(case, scenario):
    if not isinstance(case, GridCase):
        raise TypeError(f"case must be a GridCase, got {type(case).__name__}")
    if not isinstance(scenario, ScenarioData):
        raise TypeError(f"scenario must be ScenarioData, got {type(scenario).__name__}")
    if scenario.demand.shape[0] != case.n_loads:
        raise ValueError(f"scenario has {scenario.demand.shape[0]} load rows, "
                         f"case declares {case.n_loads} loads")
    report = validate_reserve(case, scenario)
    if not report.ok:
        bad = report.failing_intervals() + 1
        raise ValueError(f"capacity cannot cover demand plus reserve at "
                         f"intervals {bad.tolist()}")


class CentralizedDispatch(BaseEstimator):
    """Full-horizon dispatch in a single QP; the benchmark reference."""

    def fit(self, case, scenario):
        _check_inputs(case, scenario)
        self.network_ = build_network(case)
        self.schedule_ = solve_centralized(case, self.network_, scenario)
        self.cost_ = self.schedule_.production_cost
        return self

    def predict(self, case=None, scenario=None):
        """Fitted [unit x interval] generation schedule in MW."""
        return self.schedule_.generation


class AppDispatch(BaseEstimator):
    """Decomposed dispatch coordinated by the auxiliary problem principle.

    Parameters default to case-derived values (see AppConfig); `init` selects
    cold (zero shared variables) or warm (independent sub-horizon solves)
    initialization.
    """

    def __init__(self, n_subhorizons=7, rho=None, gamma=None, alpha=None,
                 eps=0.1, max_iter=200, init="warm", n_workers=None):
        self.n_subhorizons = n_subhorizons
        self.rho = rho
        self.gamma = gamma
        self.alpha = alpha
        self.eps = eps
        self.max_iter = max_iter
        self.init = init
        self.n_workers = n_workers

    def fit(self, case, scenario):
        _check_inputs(case, scenario)
        config = AppConfig(rho=self.rho, gamma=self.gamma, alpha=self.alpha,
                           eps=self.eps, max_iter=self.max_iter,
                           init_mode=self.init, n_workers=self.n_workers)
        self.network_ = build_network(case)
        self.schedule_, self.trace_ = run_app(case, self.network_, scenario,
                                              self.n_subhorizons, config)
        self.cost_ = self.schedule_.production_cost
        self.converged_ = self.trace_.converged
        self.n_iterations_ = self.trace_.iterations
        return self

    def predict(self, case=None, scenario=None):
        """Fitted [unit x interval] generation schedule in MW."""
        return self.schedule_.generation
