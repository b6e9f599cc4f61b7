"""User mobility: velocity-correlated random walk on the plane."""

from __future__ import annotations

import numpy as np

from .._geom import point_in_polygon
from .types import MobilityParams


def simulate_trajectory(
    params: MobilityParams,
    start,
    start_velocity,
    n_steps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Positions x_0..x_{T-1} of the correlated random walk.

    x_t - x_{t-1} = gamma (x_{t-1} - x_{t-2}) + (1-gamma) delta vbar
                    + sqrt(1-gamma^2) delta eps,   eps ~ N(0, sigma_v^2 I),

    seeded with x_0 = start and x_1 = start + delta * start_velocity.
    gamma = 1 collapses to exact rectilinear motion.
    """
    if n_steps < 2:
        raise ValueError("need at least two steps")
    g = params.gamma
    d = params.slot_s
    out = np.empty((n_steps, 2), dtype=float)
    out[0] = np.asarray(start, dtype=float)
    out[1] = out[0] + d * np.asarray(start_velocity, dtype=float)
    noise_coef = np.sqrt(max(0.0, 1.0 - g * g)) * d * params.sigma_v
    drift = (1.0 - g) * d * params.mean_velocity
    for t in range(2, n_steps):
        inc = g * (out[t - 1] - out[t - 2]) + drift
        if noise_coef > 0.0:
            inc = inc + noise_coef * rng.standard_normal(2)
        out[t] = out[t - 1] + inc
    return out


def simulate_bounded_trajectory(
    params: MobilityParams,
    start,
    start_velocity,
    n_steps: int,
    rng: np.random.Generator,
    region,
    margin: float = 0.3,
) -> np.ndarray:
    """Random walk kept inside a polygonal region by reflecting increments.

    Convenience for scene generation; the unbounded recursion above is the
    reference model.  When a step would exit the region (shrunk by
    ``margin`` at the walls via rejection), the increment is flipped.
    """
    if n_steps < 2:
        raise ValueError("need at least two steps")
    g = params.gamma
    d = params.slot_s
    out = np.empty((n_steps, 2), dtype=float)
    out[0] = np.asarray(start, dtype=float)
    step = d * np.asarray(start_velocity, dtype=float)
    cand = out[0] + step
    if not point_in_polygon(cand, region):
        step = -step
        cand = out[0] + step
    out[1] = cand
    noise_coef = np.sqrt(max(0.0, 1.0 - g * g)) * d * params.sigma_v
    drift = (1.0 - g) * d * params.mean_velocity
    for t in range(2, n_steps):
        inc = g * (out[t - 1] - out[t - 2]) + drift
        if noise_coef > 0.0:
            inc = inc + noise_coef * rng.standard_normal(2)
        cand = out[t - 1] + inc
        for _ in range(4):
            if point_in_polygon(cand, region) and _clear_of_margin(cand, region, margin):
                break
            inc = -0.5 * inc + noise_coef * rng.standard_normal(2)
            cand = out[t - 1] + inc
        else:
            cand = out[t - 1]
        out[t] = cand
    return out


def _clear_of_margin(point, region, margin):
    if margin <= 0:
        return True
    poly = np.asarray(region, dtype=float)
    p = np.asarray(point, dtype=float)
    n = poly.shape[0]
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        u = b - a
        ll = float(u @ u)
        t = np.clip(float((p - a) @ u) / ll, 0.0, 1.0)
        if np.linalg.norm(p - (a + t * u)) < margin:
            return False
    return True
