"""Mobility recursion, PPP deployment, bearing draws."""

import numpy as np
import pytest

from blindmap.envsim import MobilityParams, sample_aod, sample_ppp_aps, simulate_trajectory


class TestTrajectory:
    def test_gamma_one_is_affine(self):
        p = MobilityParams(gamma=1.0, slot_s=0.1, mean_velocity=[0.0, 0.0], sigma_v=3.0)
        traj = simulate_trajectory(p, [0.0, 0.0], [1.0, 0.0], 50, np.random.default_rng(0))
        t = np.arange(50)
        assert np.allclose(traj[:, 0], 0.1 * t, atol=1e-12)
        assert np.allclose(traj[:, 1], 0.0)

    def test_noiseless_blend_matches_scalar_recursion(self):
        g, d = 0.5, 0.2
        vbar = np.array([0.3, -0.1])
        p = MobilityParams(gamma=g, slot_s=d, mean_velocity=vbar, sigma_v=0.0)
        traj = simulate_trajectory(p, [1.0, 2.0], [0.5, 0.5], 40, np.random.default_rng(0))
        x = [np.array([1.0, 2.0]), np.array([1.0, 2.0]) + d * np.array([0.5, 0.5])]
        for t in range(2, 40):
            inc = g * (x[t - 1] - x[t - 2]) + (1 - g) * d * vbar
            x.append(x[t - 1] + inc)
        assert np.allclose(traj, np.array(x), atol=1e-12)

    def test_increment_mean_monte_carlo(self):
        g, d = 0.5, 0.1
        vbar = np.array([1.0, -0.5])
        p = MobilityParams(gamma=g, slot_s=d, mean_velocity=vbar, sigma_v=0.8)
        rng = np.random.default_rng(42)
        n = 100_000
        traj = simulate_trajectory(p, [0.0, 0.0], [0.0, 0.0], n, rng)
        inc = np.diff(traj, axis=0)
        resid = inc[1:] - g * inc[:-1]
        target = (1 - g) * d * vbar
        se = np.sqrt(1 - g**2) * d * 0.8 / np.sqrt(len(resid))
        assert np.all(np.abs(resid.mean(axis=0) - target) < 3 * se)

    def test_too_short_rejected(self):
        p = MobilityParams(gamma=0.5, slot_s=0.1, mean_velocity=[0, 0], sigma_v=0.1)
        with pytest.raises(ValueError):
            simulate_trajectory(p, [0, 0], [1, 0], 1, np.random.default_rng(0))


class TestPpp:
    def test_zero_density_empty(self):
        pts = sample_ppp_aps(0.0, 10.0, 1.0, np.random.default_rng(0))
        assert pts.shape == (0, 2)

    def test_mean_count_matches_intensity(self):
        # kappa * pi * R^2 = 8.01; thinning inside r0=0.1 removes ~0.01%
        rng = np.random.default_rng(1)
        kappa, r = 2.55e-2, 10.0
        counts = [len(sample_ppp_aps(kappa, r, 0.1, rng)) for _ in range(10_000)]
        mean = np.mean(counts)
        expect = kappa * np.pi * r * r * (1 - (0.1 / r) ** 2)
        se = np.sqrt(expect / len(counts))
        assert abs(mean - expect) < 3 * se

    def test_all_points_in_annulus(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pts = sample_ppp_aps(5e-2, 8.0, 2.0, rng)
            if len(pts) == 0:
                continue
            r = np.linalg.norm(pts, axis=1)
            assert np.all(r > 2.0)
            assert np.all(r <= 8.0 + 1e-9)

    def test_invalid_ranges(self):
        with pytest.raises(ValueError):
            sample_ppp_aps(0.1, 5.0, 5.0, np.random.default_rng(0))


class TestAodDraws:
    def test_zero_noise_exact_azimuth(self):
        assert sample_aod([1.0, 0.0], [0.0, 0.0], 0.0, np.random.default_rng(0)) == 0.0
        th = sample_aod([0.0, 2.0], [0.0, 0.0], 0.0, np.random.default_rng(0))
        assert abs(th - np.pi / 2) < 1e-12

    def test_sample_variance(self):
        rng = np.random.default_rng(3)
        draws = np.array(
            [sample_aod([3.0, 4.0], [0.0, 0.0], 0.1, rng) for _ in range(100_000)]
        )
        # far from the wrap point, circular variance equals plain variance
        var = draws.var()
        assert abs(var - 0.01) < 0.0005

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            sample_aod([1.0, 1.0], [1.0, 1.0], 0.1, np.random.default_rng(0))
