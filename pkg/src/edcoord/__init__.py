"""Multi-interval DC economic dispatch with horizon decomposition and
auxiliary-problem-principle coordination."""

from .case import (Branch, CaseError, Generator, GridCase, Load, ReserveReport,
                   ScenarioData, load_case, load_scenario, save_case,
                   save_scenario, validate_reserve)
from .coordinator import (AppConfig, BoundaryState, ConvergenceTrace,
                          augment_subproblem, check_convergence, initialize,
                          run_app, update_multipliers)
from .dispatch import (DispatchSchedule, EdProblemSpec, FeasibilityReport,
                       InfeasibleDispatch, assemble_ed_qp, check_feasibility,
                       evaluate_cost, solve_centralized)
from .estimators import AppDispatch, CentralizedDispatch
from .network import NetworkModel, build_network, line_flows
from .qp import QpSolution, QuadraticProgram, solve_qp
from .split import SubHorizon, build_subproblem_spec, split_horizon
from .synthetic import generate_synthetic_case

__all__ = [
    "AppConfig", "AppDispatch", "BoundaryState", "Branch", "CaseError",
    "CentralizedDispatch", "ConvergenceTrace", "DispatchSchedule",
    "EdProblemSpec", "FeasibilityReport", "Generator", "GridCase",
    "InfeasibleDispatch", "Load", "NetworkModel", "QpSolution",
    "QuadraticProgram", "ReserveReport", "ScenarioData", "SubHorizon",
    "assemble_ed_qp", "augment_subproblem", "build_network",
    "build_subproblem_spec", "check_convergence", "check_feasibility",
    "evaluate_cost", "generate_synthetic_case", "initialize", "line_flows",
    "load_case", "load_scenario", "run_app", "save_case", "save_scenario",
    "solve_centralized", "solve_qp", "split_horizon", "update_multipliers",
    "validate_reserve",
]
