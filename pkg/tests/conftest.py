import numpy as np
import pytest

from edcoord import (Branch, Generator, GridCase, Load, ScenarioData,
                     build_network)


@pytest.fixture
def single_bus_two_gen():
    """One bus, two quadratic units; the classic equal-incremental-cost toy."""
    case = GridCase(
        base_mva=100.0,
        buses=("b1",),
        slack_bus="b1",
        branches=(),
        generators=(
            Generator(id="g1", bus="b1", p_min=0.0, p_max=100.0,
                      cost_a=0.1, cost_b=10.0, cost_c=0.0,
                      ramp_up=20.0, ramp_down=200.0),
            Generator(id="g2", bus="b1", p_min=0.0, p_max=100.0,
                      cost_a=0.1, cost_b=20.0, cost_c=0.0,
                      ramp_up=200.0, ramp_down=200.0),
        ),
        loads=(Load(id="d1", bus="b1"),),
    )
    return case


@pytest.fixture
def two_bus_case():
    case = GridCase(
        base_mva=100.0,
        buses=("b1", "b2"),
        slack_bus="b1",
        branches=(Branch(id="l1", from_bus="b1", to_bus="b2",
                         reactance=0.1, flow_limit=100.0),),
        generators=(Generator(id="g1", bus="b1", p_min=0.0, p_max=200.0,
                              cost_a=0.01, cost_b=10.0, cost_c=0.0,
                              ramp_up=100.0, ramp_down=100.0),),
        loads=(Load(id="d1", bus="b2"),),
    )
    return case


@pytest.fixture
def triangle_case():
    """Three buses in a triangle, equal reactances."""
    case = GridCase(
        base_mva=100.0,
        buses=("b1", "b2", "b3"),
        slack_bus="b1",
        branches=(
            Branch(id="l12", from_bus="b1", to_bus="b2", reactance=0.1,
                   flow_limit=500.0),
            Branch(id="l23", from_bus="b2", to_bus="b3", reactance=0.1,
                   flow_limit=500.0),
            Branch(id="l31", from_bus="b3", to_bus="b1", reactance=0.1,
                   flow_limit=500.0),
        ),
        generators=(
            Generator(id="g1", bus="b1", p_min=0.0, p_max=300.0,
                      cost_a=0.02, cost_b=12.0, cost_c=0.0,
                      ramp_up=100.0, ramp_down=100.0),
            Generator(id="g2", bus="b2", p_min=0.0, p_max=300.0,
                      cost_a=0.03, cost_b=15.0, cost_c=0.0,
                      ramp_up=100.0, ramp_down=100.0),
        ),
        loads=(Load(id="d1", bus="b2"), Load(id="d2", bus="b3")),
    )
    return case


def flat_scenario(case, total_mw, n_t):
    """Demand split equally over the case's loads, flat over time."""
    demand = np.full((case.n_loads, n_t), total_mw / case.n_loads)
    return ScenarioData(n_intervals=n_t, demand=demand, reserve=np.zeros(n_t))
