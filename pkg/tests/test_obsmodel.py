"""Mixture emissions, neighborhoods, spatial regularizer, total objective."""

import numpy as np
import pytest
from conftest import simple_params

from blindmap._geom import SPEED_OF_LIGHT, azimuth
from blindmap.features import RadioSignature, SignatureTable
from blindmap.obsmodel import (
    NLOS,
    CsiDistanceCache,
    PropagationParams,
    RegularizationConfig,
    component_logpdf,
    emission_loglik,
    emission_loglik_grid,
    load_params,
    nlos_neighborhood,
    save_params,
    spatial_reg_loglik,
    total_objective,
)


def scalar_gauss(x, mu, var):
    return -0.5 * (np.log(2 * np.pi * var) + (x - mu) ** 2 / var)


class TestEmission:
    def test_zero_residual_gives_log_norm_constant(self):
        params = simple_params(1, 1)
        params.pi[0, 0] = [1.0, 0.0]
        ap = np.array([0.0, 0.0])
        pos = np.array([10.0, 0.0])
        d = 10.0
        s = params.beta[0, 0] + params.alpha[0, 0] * np.log10(d)
        # (s, nu) exactly at the component mean requires s == m[0,0]
        params.m[0] = [s, -25.0]
        sig = RadioSignature(rss_db=s, aod_rad=azimuth(ap, pos), spread_db=-25.0,
                             ap_id=0, time_index=0)
        ll = emission_loglik(sig, pos, ap, params)
        det = (
            params.sigma_s2[0, 0]
            * params.sigma_theta2[0]
            * np.linalg.det(params.upsilon[0])
        )
        expect = -0.5 * np.log((2 * np.pi) ** 4 * det)
        assert np.isclose(ll, expect, rtol=1e-12)

    def test_equal_weights_average_of_components(self):
        params = simple_params(1, 1)
        ap = np.array([0.0, 0.0])
        pos = np.array([3.0, 4.0])
        sig = RadioSignature(rss_db=-50.0, aod_rad=1.0, spread_db=-20.0, ap_id=0, time_index=0)
        l0 = component_logpdf(-50.0, 1.0, -20.0, pos, ap, params, 0, 0)
        l1 = component_logpdf(-50.0, 1.0, -20.0, pos, ap, params, 0, 1)
        expect = np.log(0.5 * np.exp(l0) + 0.5 * np.exp(l1))
        assert np.isclose(emission_loglik(sig, pos, ap, params), expect, rtol=1e-12)

    def test_component_matches_scalar_oracle(self):
        params = simple_params(1, 1)
        ap = np.array([0.0, 0.0])
        pos = np.array([3.0, 4.0])
        d = 5.0
        phi = azimuth(ap, pos)
        s, th, nu = -48.0, phi + 0.2, -22.0
        got = component_logpdf(s, th, nu, pos, ap, params, 0, 1)
        mu_s = params.beta[0, 1] + params.alpha[0, 1] * np.log10(d)
        expect = (
            scalar_gauss(s, mu_s, params.sigma_s2[0, 1])
            + scalar_gauss(0.2, 0.0, params.sigma_theta2[1])
            + scalar_gauss(s, params.m[1][0], params.upsilon[1][0, 0])
            + scalar_gauss(nu, params.m[1][1], params.upsilon[1][1, 1])
        )
        assert np.isclose(got, expect, rtol=1e-10)

    def test_angle_wrap_symmetric(self):
        params = simple_params(1, 1)
        ap = np.array([0.0, 0.0])
        pos = np.array([10.0, 0.0])  # phi = 0
        near_2pi = RadioSignature(rss_db=-50.0, aod_rad=2 * np.pi - 0.01, spread_db=-20.0,
                                  ap_id=0, time_index=0)
        neg = RadioSignature(rss_db=-50.0, aod_rad=-0.01 % (2 * np.pi), spread_db=-20.0,
                             ap_id=0, time_index=0)
        assert np.isclose(
            emission_loglik(near_2pi, pos, ap, params),
            emission_loglik(neg, pos, ap, params),
            rtol=1e-12,
        )

    def test_convex_combination_bounds(self):
        rng = np.random.default_rng(0)
        params = simple_params(1, 1)
        ap = np.array([0.0, 0.0])
        for _ in range(50):
            pos = rng.uniform(1, 20, 2)
            sig = RadioSignature(
                rss_db=rng.uniform(-80, -30), aod_rad=rng.uniform(0, 2 * np.pi),
                spread_db=rng.uniform(-40, -5), ap_id=0, time_index=0,
            )
            l0 = component_logpdf(sig.rss_db, sig.aod_rad, sig.spread_db, pos, ap, params, 0, 0)
            l1 = component_logpdf(sig.rss_db, sig.aod_rad, sig.spread_db, pos, ap, params, 0, 1)
            ll = emission_loglik(sig, pos, ap, params)
            assert min(l0, l1) + np.log(0.5) - 1e-9 <= ll <= max(l0, l1) + 1e-9

    def test_grid_matches_scalar(self):
        rng = np.random.default_rng(1)
        t_len, q_len = 4, 2
        params = simple_params(t_len, q_len)
        aps = [np.array([0.0, 0.0]), np.array([20.0, 0.0])]
        table = SignatureTable(
            rss_db=rng.uniform(-70, -40, (t_len, q_len)),
            aod_rad=rng.uniform(0, 2 * np.pi, (t_len, q_len)),
            spread_db=rng.uniform(-30, -10, (t_len, q_len)),
        )
        nodes = rng.uniform(1, 15, (5, 2))
        grid = emission_loglik_grid(table, nodes, aps, params)
        for t in range(t_len):
            for n in range(5):
                expect = sum(
                    emission_loglik(table.at(t, q), nodes[n], aps[q], params)
                    for q in range(q_len)
                )
                assert np.isclose(grid[t, n], expect, rtol=1e-10)

    def test_position_at_ap_rejected(self):
        params = simple_params(1, 1)
        sig = RadioSignature(rss_db=-50.0, aod_rad=0.0, spread_db=-20.0, ap_id=0, time_index=0)
        with pytest.raises(ValueError):
            emission_loglik(sig, np.array([1.0, 1.0]), np.array([1.0, 1.0]), params)


class TestNeighborhood:
    def test_all_los_empty(self):
        traj = np.zeros((5, 2))
        assign = np.zeros((5, 2), dtype=int)
        cfg = RegularizationConfig(eta=1.0, neighborhood_radius_m=2.0, bandwidth_hz=1e8)
        for t in range(5):
            for q in range(2):
                assert len(nlos_neighborhood(t, q, traj, assign, cfg)) == 0

    def test_mutual_membership(self):
        traj = np.array([[0.0, 0.0], [1.0, 0.0]])
        assign = np.ones((2, 1), dtype=int)
        cfg = RegularizationConfig(eta=1.0, neighborhood_radius_m=2.0, bandwidth_hz=1e8)
        assert list(nlos_neighborhood(0, 0, traj, assign, cfg)) == [1]
        assert list(nlos_neighborhood(1, 0, traj, assign, cfg)) == [0]

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(2)
        traj = rng.uniform(0, 10, (40, 2))
        assign = rng.integers(0, 2, (40, 3))
        cfg = RegularizationConfig(eta=1.0, neighborhood_radius_m=2.5, bandwidth_hz=1e8)
        for t in range(40):
            for q in range(3):
                got = set(nlos_neighborhood(t, q, traj, assign, cfg).tolist())
                want = set()
                if assign[t, q] == NLOS:
                    for tau in range(40):
                        if tau == t or assign[tau, q] != NLOS:
                            continue
                        if np.linalg.norm(traj[t] - traj[tau]) < 2.5:
                            want.add(tau)
                assert got == want


class FakeCache:
    """Stand-in for the channel-pair distance table with preset values."""

    def __init__(self, values):
        self.values = values

    def get_many(self, t, taus, q):
        return np.array([self.values[(t, int(tau), q)] for tau in taus], dtype=float)


class TestSpatialReg:
    def test_empty_neighborhood_zero(self):
        params = simple_params(3, 1)
        params.assignments[:] = 0
        traj = np.zeros((3, 2))
        cfg = RegularizationConfig(eta=1.0, neighborhood_radius_m=2.0, bandwidth_hz=1e8)
        assert spatial_reg_loglik(0, 0, traj, None, params, cfg, cache=FakeCache({})) == 0.0

    def test_exact_match_single_neighbor(self):
        params = simple_params(2, 1)
        params.assignments[:] = 1
        params.sigma_u2 = 1.0
        traj = np.array([[0.0, 0.0], [1.5, 0.0]])
        b = 1e8
        cfg = RegularizationConfig(eta=1.0, neighborhood_radius_m=2.0, bandwidth_hz=b)
        u_exact = b / SPEED_OF_LIGHT * 1.5
        cache = FakeCache({(0, 1, 0): u_exact})
        got = spatial_reg_loglik(0, 0, traj, None, params, cfg, cache=cache)
        assert np.isclose(got, -0.5 * np.log(2 * np.pi), rtol=1e-12)

    def test_three_neighbors_mean_of_scalars(self):
        params = simple_params(4, 1)
        params.assignments[:] = 1
        params.sigma_u2 = 1.0
        traj = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]])
        b = 1e8
        cfg = RegularizationConfig(eta=1.0, neighborhood_radius_m=2.0, bandwidth_hz=b)
        resids = {1: 0.0, 2: 1.0, 3: 2.0}
        values = {}
        for tau, r in resids.items():
            d = np.linalg.norm(traj[tau] - traj[0])
            values[(0, tau, 0)] = b / SPEED_OF_LIGHT * d + r
        got = spatial_reg_loglik(0, 0, traj, None, params, cfg, cache=FakeCache(values))
        expect = np.mean([scalar_gauss(r, 0.0, 1.0) for r in resids.values()])
        assert np.isclose(got, expect, rtol=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        params = simple_params(10, 1)
        params.assignments[:] = 1
        traj = rng.uniform(0, 5, (10, 2))
        b = 1e8
        cfg = RegularizationConfig(eta=1.0, neighborhood_radius_m=3.0, bandwidth_hz=b)
        values = {
            (t, tau, 0): float(rng.integers(0, 5))
            for t in range(10)
            for tau in range(10)
            if t != tau
        }
        cache = FakeCache(values)
        base = [spatial_reg_loglik(t, 0, traj, None, params, cfg, cache=cache) for t in range(10)]
        shifted = [
            spatial_reg_loglik(t, 0, traj + np.array([100.0, -7.0]), None, params, cfg, cache=cache)
            for t in range(10)
        ]
        assert np.allclose(base, shifted, rtol=1e-12)


class TestTotalObjective:
    def _setup(self, eta):
        from blindmap.inference import build_graph

        rng = np.random.default_rng(4)
        region = np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]])
        graph = build_graph(region, 1.0, 1.5)
        t_len, q_len = 3, 2
        params = simple_params(t_len, q_len)
        params.assignments[:] = 1
        aps = [np.array([-1.0, 0.0]), np.array([5.0, 5.0])]
        table = SignatureTable(
            rss_db=rng.uniform(-70, -40, (t_len, q_len)),
            aod_rad=rng.uniform(0, 2 * np.pi, (t_len, q_len)),
            spread_db=rng.uniform(-30, -10, (t_len, q_len)),
        )
        cfg = RegularizationConfig(eta=eta, neighborhood_radius_m=3.0, bandwidth_hz=1e8)
        values = {
            (t, tau, q): float((t + tau + q) % 4)
            for t in range(t_len)
            for tau in range(t_len)
            for q in range(q_len)
            if t != tau
        }
        return graph, params, aps, table, cfg, FakeCache(values)

    def test_three_step_hand_sum(self):
        from blindmap.envsim import MobilityParams
        from blindmap.inference import transition_logprob

        graph, params, aps, table, cfg, cache = self._setup(eta=0.7)
        mob = MobilityParams(gamma=0.5, slot_s=0.2, mean_velocity=[0.1, 0.0], sigma_v=1.0)
        nodes = np.array([0, 1, 2])
        got = total_objective(
            nodes, table, None, params, mob, graph, aps, cfg, cache=cache
        )
        expect = 0.0
        for t in range(3):
            for q in range(2):
                expect += emission_loglik(table.at(t, q), graph.nodes[nodes[t]], aps[q], params)
        expect += transition_logprob(2, 1, 0, graph, mob)
        for t in range(3):
            for q in range(2):
                expect += cfg.eta * spatial_reg_loglik(
                    t, q, graph.nodes[nodes], None, params, cfg, cache=cache
                )
        assert np.isclose(got, expect, rtol=1e-10)

    def test_eta_zero_removes_reg_and_sigma_u2(self):
        from blindmap.envsim import MobilityParams

        graph, params, aps, table, _, cache = self._setup(eta=0.0)
        mob = MobilityParams(gamma=0.5, slot_s=0.2, mean_velocity=[0.0, 0.0], sigma_v=1.0)
        cfg0 = RegularizationConfig(eta=0.0, neighborhood_radius_m=3.0, bandwidth_hz=1e8)
        nodes = np.array([0, 1, 2])
        v1 = total_objective(nodes, table, None, params, mob, graph, aps, cfg0, cache=cache)
        params.sigma_u2 = 123.0
        v2 = total_objective(nodes, table, None, params, mob, graph, aps, cfg0, cache=cache)
        assert v1 == v2

    def test_rss_offset_invariance(self):
        from blindmap.envsim import MobilityParams

        graph, params, aps, table, cfg, cache = self._setup(eta=0.0)
        mob = MobilityParams(gamma=0.5, slot_s=0.2, mean_velocity=[0.0, 0.0], sigma_v=1.0)
        nodes = np.array([0, 1, 2])
        v1 = total_objective(nodes, table, None, params, mob, graph, aps, cfg, cache=cache)
        # shifting every RSS and every path-loss intercept and (s) mean cancels
        table2 = SignatureTable(
            rss_db=table.rss_db + 7.0, aod_rad=table.aod_rad, spread_db=table.spread_db
        )
        params.beta = params.beta + 7.0
        params.m = params.m + np.array([7.0, 0.0])
        v2 = total_objective(nodes, table2, None, params, mob, graph, aps, cfg, cache=cache)
        assert np.isclose(v1, v2, rtol=1e-10)


class TestParamsIO:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        params = simple_params(3, 2)
        params.beta = params.beta + rng.standard_normal(params.beta.shape)
        params.sigma_u2 = float(np.pi)
        f = tmp_path / "params.json"
        save_params(f, params)
        back = load_params(f)
        for name in ("beta", "alpha", "sigma_s2", "sigma_theta2", "m", "upsilon", "pi"):
            assert np.array_equal(getattr(back, name), getattr(params, name)), name
        assert np.array_equal(back.assignments, params.assignments)
        assert back.sigma_u2 == params.sigma_u2
