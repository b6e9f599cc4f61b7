"""Shared synthetic-data helpers for the test suite."""

import numpy as np

from blindmap._geom import azimuth, wrap_2pi
from blindmap.features import SignatureTable
from blindmap.obsmodel import PropagationParams


def synth_observation_set(
    rng,
    n_steps=120,
    ap_positions=((0.0, 0.0), (20.0, 0.0), (20.0, 16.0), (0.0, 16.0)),
    region=(20.0, 16.0),
    nlos_prob=0.35,
    beta=(-40.0, -52.0),
    alpha=(-20.0, -26.0),
    sigma_s=(1.5, 2.5),
    sigma_theta=(0.03, 0.9),
    nu_means=(-26.0, -12.0),
    nu_sigma=(1.0, 1.5),
    positions=None,
    assignments=None,
):
    """Draw signatures from the two-condition generative model.

    Returns (table, positions, assignments, truth) where truth holds the
    empirical component means of (s, nu) under the true assignment, the
    direct estimand for the mixture-mean recovery checks.
    """
    aps = np.asarray(ap_positions, dtype=float)
    q_len = len(aps)
    if positions is None:
        positions = np.column_stack(
            [
                rng.uniform(1.0, region[0] - 1.0, n_steps),
                rng.uniform(1.0, region[1] - 1.0, n_steps),
            ]
        )
    n_steps = len(positions)
    if assignments is None:
        assignments = (rng.uniform(size=(n_steps, q_len)) < nlos_prob).astype(int)
    rss = np.empty((n_steps, q_len))
    aod = np.empty((n_steps, q_len))
    spread = np.empty((n_steps, q_len))
    for q in range(q_len):
        d = np.linalg.norm(positions - aps[q], axis=1)
        phi = azimuth(aps[q], positions)
        for t in range(n_steps):
            k = assignments[t, q]
            rss[t, q] = beta[k] + alpha[k] * np.log10(d[t]) + sigma_s[k] * rng.standard_normal()
            aod[t, q] = wrap_2pi(phi[t] + sigma_theta[k] * rng.standard_normal())
            spread[t, q] = nu_means[k] + nu_sigma[k] * rng.standard_normal()
    table = SignatureTable(rss_db=rss, aod_rad=aod, spread_db=spread)
    feats = np.stack([rss, spread], axis=-1)
    m_true = np.full((2, 2), np.nan)
    for k in range(2):
        if np.any(assignments == k):
            m_true[k] = feats[assignments == k].mean(axis=0)
    truth = {
        "m": m_true,
        "beta": np.array(beta),
        "alpha": np.array(alpha),
        "sigma_theta": np.array(sigma_theta),
    }
    return table, positions, assignments, truth


def simple_params(n_steps, q_len, beta=-40.0, alpha=-20.0):
    """Hand-set two-component parameters for direct likelihood checks."""
    return PropagationParams(
        beta=np.full((q_len, 2), beta) + np.array([0.0, -10.0]),
        alpha=np.full((q_len, 2), alpha) + np.array([0.0, -5.0]),
        sigma_s2=np.full((q_len, 2), 4.0),
        sigma_theta2=np.array([0.01, 0.8]),
        m=np.array([[-45.0, -25.0], [-55.0, -12.0]]),
        upsilon=np.stack([np.diag([4.0, 1.0]), np.diag([9.0, 2.0])]),
        pi=np.full((n_steps, q_len, 2), 0.5),
        assignments=np.zeros((n_steps, q_len), dtype=int),
        sigma_u2=1.0,
    )
