import numpy as np
import pytest
import scipy.sparse as sp

from edcoord import (AppConfig, BoundaryState, ConvergenceTrace, build_network,
                     generate_synthetic_case, run_app, solve_centralized)
from edcoord.coordinator import (STATUS_CONVERGED, TraceRow, augment_subproblem,
                                 check_convergence, initialize,
                                 update_multipliers)
from edcoord.dispatch import InfeasibleDispatch, assemble_ed_qp
from edcoord.case import ScenarioData
from edcoord.qp import PersistentQpSolver, solve_qp
from edcoord.split import build_subproblem_spec, split_horizon
from tests.conftest import flat_scenario


def make_subproblems(case, scen, n_sub):
    net = build_network(case)
    subs = split_horizon(scen.n_intervals, n_sub)
    specs = [build_subproblem_spec(s, case, net, scen) for s in subs]
    return net, subs, specs


class TestAppConfig:
    def test_defaults_resolve_positive(self, single_bus_two_gen):
        cfg = AppConfig().resolved(single_bus_two_gen)
        assert cfg.rho > 0 and cfg.gamma > 0 and cfg.alpha > 0
        # cross and step weights keep a stability margin below the proximal one
        assert cfg.gamma == pytest.approx(cfg.rho / 2)
        assert cfg.alpha == pytest.approx(cfg.rho / 2)

    def test_explicit_values_kept(self, single_bus_two_gen):
        cfg = AppConfig(rho=3.0, gamma=1.0, alpha=0.5).resolved(single_bus_two_gen)
        assert (cfg.rho, cfg.gamma, cfg.alpha) == (3.0, 1.0, 0.5)

    def test_rejects_nonpositive(self, single_bus_two_gen):
        with pytest.raises(ValueError, match="rho"):
            AppConfig(rho=0.0).resolved(single_bus_two_gen)

    def test_rejects_bad_init_mode(self, single_bus_two_gen):
        with pytest.raises(ValueError, match="init_mode"):
            AppConfig(init_mode="lukewarm").resolved(single_bus_two_gen)


class TestAugmentation:
    @pytest.fixture
    def block(self, single_bus_two_gen):
        scen = flat_scenario(single_bus_two_gen, 100.0, 4)
        net, subs, specs = make_subproblems(single_bus_two_gen, scen, 2)
        return subs, [assemble_ed_qp(s) for s in specs]

    def state(self, phi_left, phi_right, lam):
        return BoundaryState(index=0, phi_left=np.asarray(phi_left, float),
                             phi_right=np.asarray(phi_right, float),
                             lam=np.asarray(lam, float))

    def test_zero_coefficients_identity(self, block):
        subs, qps = block
        cfg = AppConfig(rho=0.0, gamma=0.0, alpha=0.0)
        s = self.state([10.0, 20.0], [30.0, 40.0], [0.0, 0.0])
        out = augment_subproblem(qps[0], subs[0], None, s, cfg, n_units=2)
        np.testing.assert_array_equal(out.c, qps[0].c)
        assert (out.H != qps[0].H).nnz == 0

    def test_proximal_arithmetic(self, block):
        # rho=2, phi_left*=10: the coupling-hour vars gain +2 on H's diagonal
        # and -2*10 on c
        subs, qps = block
        cfg = AppConfig(rho=2.0, gamma=0.0, alpha=0.0)
        s = self.state([10.0, 10.0], [10.0, 10.0], [0.0, 0.0])
        out = augment_subproblem(qps[0], subs[0], None, s, cfg, n_units=2)
        n = qps[0].n
        np.testing.assert_allclose(out.H.diagonal()[n - 2:],
                                   qps[0].H.diagonal()[n - 2:] + 2.0)
        np.testing.assert_allclose(out.c[n - 2:], qps[0].c[n - 2:] - 20.0)
        # earlier intervals untouched
        np.testing.assert_array_equal(out.c[:n - 2], qps[0].c[:n - 2])

    def test_cross_term_uses_signed_mismatch(self, block):
        subs, qps = block
        cfg = AppConfig(rho=0.0, gamma=1.5, alpha=0.0)
        s = self.state([12.0, 0.0], [10.0, 0.0], [0.0, 0.0])
        n = qps[0].n
        out = augment_subproblem(qps[0], subs[0], None, s, cfg, n_units=2)
        np.testing.assert_allclose(out.c[n - 2] - qps[0].c[n - 2], 1.5 * 2.0)
        # the right-hand block sees the opposite sign on its first hour
        out2 = augment_subproblem(qps[1], subs[1], s, None, cfg, n_units=2)
        np.testing.assert_allclose(out2.c[0] - qps[1].c[0], 1.5 * (-2.0))

    def test_multiplier_signs_opposite(self, block):
        # the coupling-hour copy pays -lam, the hour-1 copy pays +lam
        subs, qps = block
        cfg = AppConfig(rho=0.0, gamma=0.0, alpha=0.0)
        s = self.state([0.0, 0.0], [0.0, 0.0], [5.0, 5.0])
        n = qps[0].n
        left_block = augment_subproblem(qps[0], subs[0], None, s, cfg, n_units=2)
        right_block = augment_subproblem(qps[1], subs[1], s, None, cfg, n_units=2)
        np.testing.assert_allclose(left_block.c[n - 2:] - qps[0].c[n - 2:], -5.0)
        np.testing.assert_allclose(right_block.c[:2] - qps[1].c[:2], +5.0)

    def test_boundary_role_mismatch_rejected(self, block):
        subs, qps = block
        cfg = AppConfig(rho=1.0, gamma=1.0, alpha=1.0)
        s = self.state([0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
        with pytest.raises(ValueError, match="no right boundary"):
            augment_subproblem(qps[1], subs[1], None, s, cfg, n_units=2)
        with pytest.raises(ValueError, match="no left boundary"):
            augment_subproblem(qps[0], subs[0], s, None, cfg, n_units=2)


class TestMultiplierUpdate:
    def test_ascent_direction(self):
        s = BoundaryState(index=0, phi_left=np.array([30.0]),
                          phi_right=np.array([50.0]), lam=np.array([1.0]))
        out = update_multipliers(s, alpha=0.25)
        np.testing.assert_allclose(out.lam, 1.0 + 0.25 * (50.0 - 30.0))
        assert out.iteration == s.iteration + 1

    def test_zero_mismatch_leaves_lambda(self):
        s = BoundaryState(index=0, phi_left=np.array([42.0, 7.0]),
                          phi_right=np.array([42.0, 7.0]),
                          lam=np.array([3.0, -1.0]))
        out = update_multipliers(s, alpha=10.0)
        np.testing.assert_array_equal(out.lam, s.lam)

    def test_linear_in_alpha(self):
        s = BoundaryState(index=0, phi_left=np.array([1.0]),
                          phi_right=np.array([4.0]), lam=np.array([0.0]))
        d1 = update_multipliers(s, alpha=1.0).lam
        d3 = update_multipliers(s, alpha=3.0).lam
        np.testing.assert_allclose(d3, 3.0 * d1)


class TestConvergenceCheck:
    def make(self, mismatches):
        return [BoundaryState(index=i, phi_left=np.array([m]),
                              phi_right=np.array([0.0]), lam=np.array([0.0]))
                for i, m in enumerate(mismatches)]

    def test_inclusive_at_eps(self):
        ok, worst = check_convergence(self.make([0.1, 0.05]), eps=0.1)
        assert ok and worst == pytest.approx(0.1)

    def test_above_eps_fails(self):
        ok, worst = check_convergence(self.make([0.100001]), eps=0.1)
        assert not ok

    def test_no_boundaries_converged(self):
        assert check_convergence([], eps=0.1) == (True, 0.0)


class TestFixedPoint:
    def test_consensus_is_stationary(self, single_bus_two_gen):
        # flat demand, no binding ramps at the boundary: the centralized
        # boundary dispatch with lam = 0 must reproduce itself through one
        # augmented solve on either side
        case = single_bus_two_gen
        scen = flat_scenario(case, 100.0, 4)
        net, subs, specs = make_subproblems(case, scen, 2)
        cen = solve_centralized(case, net, scen)
        phi = cen.generation[:, 2].copy()  # boundary hour = first hour of block 2
        state = BoundaryState(index=0, phi_left=phi, phi_right=phi,
                              lam=np.zeros(2))
        cfg = AppConfig(rho=1.0, gamma=1.0, alpha=1.0)
        for qp, sub, left, right in [(assemble_ed_qp(specs[0]), subs[0], None, state),
                                     (assemble_ed_qp(specs[1]), subs[1], state, None)]:
            sol = solve_qp(augment_subproblem(qp, sub, left, right, cfg, n_units=2))
            gen = sol.x.reshape(-1, 2).T
            col = -1 if right is not None else 0
            np.testing.assert_allclose(gen[:, col], phi, atol=1e-4)


class TestRunApp:
    def test_single_subhorizon_degenerates_to_centralized(self, triangle_case):
        scen = flat_scenario(triangle_case, 200.0, 6)
        net = build_network(triangle_case)
        cen = solve_centralized(triangle_case, net, scen)
        sch, trace = run_app(triangle_case, net, scen, 1)
        np.testing.assert_array_equal(sch.generation, cen.generation)
        assert sch.status == STATUS_CONVERGED
        assert trace.converged and trace.iterations == 0

    def test_flat_demand_converges_immediately_warm(self, single_bus_two_gen):
        scen = flat_scenario(single_bus_two_gen, 100.0, 4)
        net = build_network(single_bus_two_gen)
        sch, trace = run_app(single_bus_two_gen, net, scen, 2,
                             AppConfig(init_mode="warm", n_workers=1))
        assert trace.converged and trace.iterations == 1
        cen = solve_centralized(single_bus_two_gen, net, scen)
        np.testing.assert_allclose(sch.production_cost, cen.production_cost,
                                   rtol=1e-6)

    @pytest.mark.parametrize("mode,tol", [("warm", 5e-3), ("cold", 2e-2)])
    def test_small_synthetic_matches_centralized(self, mode, tol):
        # cold start is allowed a looser band: it can settle on a consensus
        # point further from the centralized optimum than warm start does
        case, scen = generate_synthetic_case(4, seed=21, horizon=12)
        net = build_network(case)
        cen = solve_centralized(case, net, scen)
        sch, trace = run_app(case, net, scen, 3,
                             AppConfig(init_mode=mode, n_workers=1))
        assert trace.converged
        assert abs(sch.production_cost - cen.production_cost) \
            <= tol * cen.production_cost
        assert sch.feasibility.ok

    def test_warm_lands_closer_than_cold(self):
        case, scen = generate_synthetic_case(10, seed=5, horizon=24)
        net = build_network(case)
        cen = solve_centralized(case, net, scen)
        warm_sch, warm = run_app(case, net, scen, 2,
                                 AppConfig(init_mode="warm", n_workers=1))
        cold_sch, cold = run_app(case, net, scen, 2,
                                 AppConfig(init_mode="cold", n_workers=1))
        assert warm.converged and cold.converged
        warm_err = abs(warm_sch.production_cost - cen.production_cost)
        cold_err = abs(cold_sch.production_cost - cen.production_cost)
        assert warm_err <= cold_err

    def test_mismatch_trace_is_recorded(self):
        case, scen = generate_synthetic_case(5, seed=2, horizon=12)
        net = build_network(case)
        _, trace = run_app(case, net, scen, 3, AppConfig(init_mode="cold",
                                                         n_workers=1))
        assert trace.converged
        iters = [r.iteration for r in trace.rows]
        assert iters == list(range(1, len(iters) + 1))
        assert all(r.boundary_mismatch_mw.shape == (2,) for r in trace.rows)
        assert trace.rows[-1].max_mismatch_mw <= trace.eps

    def test_infeasible_subproblem_raises(self, single_bus_two_gen):
        # demand above total capacity in the second block only
        demand = np.array([[100.0, 100.0, 500.0, 500.0]])
        scen = ScenarioData(4, demand, np.zeros(4))
        net = build_network(single_bus_two_gen)
        with pytest.raises(InfeasibleDispatch):
            run_app(single_bus_two_gen, net, scen, 2, AppConfig(n_workers=1))

    def test_max_iter_flagged(self):
        case, scen = generate_synthetic_case(5, seed=2, horizon=12)
        net = build_network(case)
        sch, trace = run_app(case, net, scen, 3,
                             AppConfig(init_mode="cold", max_iter=1, n_workers=1))
        assert not trace.converged
        assert sch.status == "max-iterations"
        assert trace.iterations == 1

    def test_boundary_ramp_within_limits_plus_eps(self):
        case, scen = generate_synthetic_case(8, seed=9, horizon=16)
        net = build_network(case)
        cfg = AppConfig(init_mode="warm", n_workers=1)
        sch, trace = run_app(case, net, scen, 4, cfg)
        assert trace.converged
        p = sch.generation
        ur = case.gen_array("ramp_up")
        dr = case.gen_array("ramp_down")
        for sub in split_horizon(16, 4)[:-1]:
            d = p[:, sub.stop] - p[:, sub.stop - 1]
            assert np.all(d <= ur + cfg.eps + 1e-6)
            assert np.all(-d <= dr + cfg.eps + 1e-6)


class TestInitialize:
    def test_cold_is_all_zero(self, single_bus_two_gen):
        scen = flat_scenario(single_bus_two_gen, 100.0, 4)
        net = build_network(single_bus_two_gen)
        subs = split_horizon(4, 2)
        cfg = AppConfig(n_workers=1).resolved(single_bus_two_gen)
        states, gens, wall = initialize("cold", subs, single_bus_two_gen, net,
                                        scen, cfg)
        assert gens is None and wall == 0.0
        for s in states:
            np.testing.assert_array_equal(s.phi_left, 0.0)
            np.testing.assert_array_equal(s.phi_right, 0.0)
            np.testing.assert_array_equal(s.lam, 0.0)

    def test_warm_seeds_from_independent_solves(self, single_bus_two_gen):
        scen = flat_scenario(single_bus_two_gen, 100.0, 4)
        net = build_network(single_bus_two_gen)
        subs = split_horizon(4, 2)
        cfg = AppConfig(n_workers=1).resolved(single_bus_two_gen)
        states, gens, _ = initialize("warm", subs, single_bus_two_gen, net,
                                     scen, cfg)
        assert len(gens) == 2 and gens[0].shape == (2, 2)
        np.testing.assert_array_equal(states[0].phi_left, gens[0][:, -1])
        np.testing.assert_array_equal(states[0].phi_right, gens[1][:, 0])
        np.testing.assert_array_equal(states[0].lam, 0.0)


class TestTraceCsv:
    def test_header_and_rows(self, tmp_path):
        trace = ConvergenceTrace(eps=0.1, converged=True)
        trace.rows.append(TraceRow(iteration=1, max_mismatch_mw=2.0,
                                   cost_usd=100.0,
                                   boundary_mismatch_mw=np.array([2.0, 1.0]),
                                   wall_time_s=0.5))
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iter,max_mismatch_mw,cost_usd," \
                           "boundary_1_mismatch,boundary_2_mismatch"
        assert lines[1].startswith("1,2.0,100.0")
        # no timing column: repeated runs must produce identical files
        assert "0.5" not in lines[0] and "time" not in lines[0]


class TestPersistentQpSolver:
    def base_qp(self, h, c):
        from edcoord.qp import QuadraticProgram
        return QuadraticProgram(H=sp.diags(np.asarray(h, float)),
                                c=np.asarray(c, float),
                                A_eq=sp.csc_matrix(np.ones((1, len(c)))),
                                b_eq=np.array([10.0]),
                                lower=np.zeros(len(c)),
                                upper=np.full(len(c), 10.0))

    def test_matches_one_shot_solver(self):
        qp1 = self.base_qp([2.0, 4.0], [1.0, -1.0])
        ps = PersistentQpSolver(qp1)
        s1 = ps.solve(qp1)
        np.testing.assert_allclose(s1.x, solve_qp(qp1).x, atol=1e-6)
        # new objective data, same constraints
        qp2 = self.base_qp([3.0, 1.0], [-2.0, 2.0])
        s2 = ps.solve(qp2)
        np.testing.assert_allclose(s2.x, solve_qp(qp2).x, atol=1e-6)

    def test_repeated_solves_deterministic(self):
        qp = self.base_qp([2.0, 4.0], [1.0, -1.0])
        ps = PersistentQpSolver(qp)
        a = ps.solve(qp)
        b = ps.solve(qp)
        np.testing.assert_array_equal(a.x, b.x)

    def test_rejects_nondiagonal(self):
        from edcoord.qp import QuadraticProgram
        h = np.array([[2.0, 0.5], [0.5, 2.0]])
        qp = QuadraticProgram(H=sp.csc_matrix(h), c=np.zeros(2))
        with pytest.raises(ValueError, match="diagonal"):
            PersistentQpSolver(qp)
