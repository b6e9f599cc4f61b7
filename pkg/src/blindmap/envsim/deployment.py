"""Random AP deployment and noisy bearing draws."""

from __future__ import annotations

import numpy as np

from .._geom import azimuth, wrap_2pi


def sample_ppp_aps(
    density: float,
    region_radius: float,
    min_range: float,
    rng: np.random.Generator,
    trajectory=None,
    center=(0.0, 0.0),
) -> np.ndarray:
    """Poisson point process of APs on a disc, thinned near the trajectory.

    The count is Poisson(density * pi * R^2); positions are uniform on the
    disc of radius ``region_radius`` around ``center``.  Points closer than
    ``min_range`` to any trajectory point (default: the center) are
    discarded, so the retained process is the restriction of the PPP to
    the region at least min_range away.
    """
    if density < 0:
        raise ValueError("density must be >= 0")
    if not (0.0 < min_range < region_radius):
        raise ValueError("need 0 < min_range < region_radius")
    center = np.asarray(center, dtype=float)
    n = rng.poisson(density * np.pi * region_radius**2)
    if n == 0:
        return np.empty((0, 2), dtype=float)
    r = region_radius * np.sqrt(rng.uniform(size=n))
    ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = center + np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    ref = np.atleast_2d(center if trajectory is None else np.asarray(trajectory, float))
    d2 = ((pts[:, None, :] - ref[None, :, :]) ** 2).sum(axis=2)
    keep = d2.min(axis=1) > min_range**2
    return pts[keep]


def sample_aod(position, ap_position, sigma_theta: float, rng: np.random.Generator) -> float:
    """Noisy azimuth of the dominant departure direction, wrapped to [0, 2pi)."""
    position = np.asarray(position, dtype=float)
    ap_position = np.asarray(ap_position, dtype=float)
    if np.allclose(position, ap_position):
        raise ValueError("position coincides with the AP")
    mean = azimuth(ap_position, position)
    if sigma_theta == 0.0:
        return wrap_2pi(mean)
    return wrap_2pi(mean + sigma_theta * rng.standard_normal())
