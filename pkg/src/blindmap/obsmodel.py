"""Gaussian-mixture observation model and the spatially regularized objective.

The per-(t, q) radio signature y = [s, theta, s, nu] is modeled as a
two-component mixture (k = 0 line-of-sight, k = 1 obstructed), with
block-diagonal covariance: an AP-and-condition dependent path-loss block,
a condition-dependent bearing block with wrapped residuals, and a shared
(s, nu) Gaussian per condition.  Channels measured at nearby obstructed
positions are additionally tied together through the lag-correlation
distance, which grows as (B/c) times the physical separation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._geom import SPEED_OF_LIGHT, wrap_pi
from .features import RadioSignature, SignatureTable, csi_distance

PARAMS_VERSION = "blindmap-params/1"

LOS = 0
NLOS = 1

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PropagationParams:
    """All signature-model parameters for Q APs over T slots.

    Shapes: beta/alpha/sigma_s2 are (Q, 2); sigma_theta2 is (2,);
    m is (2, 2) with row k the (s, nu) mean; upsilon is (2, 2, 2) with
    upsilon[k] the (s, nu) covariance; pi is (T, Q, 2); assignments is
    (T, Q) holding the hard condition k per measurement.
    """

    beta: np.ndarray
    alpha: np.ndarray
    sigma_s2: np.ndarray
    sigma_theta2: np.ndarray
    m: np.ndarray
    upsilon: np.ndarray
    pi: np.ndarray
    assignments: np.ndarray
    sigma_u2: float = 1.0

    def __post_init__(self):
        for name in ("beta", "alpha", "sigma_s2", "sigma_theta2", "m", "upsilon", "pi"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.assignments = np.asarray(self.assignments, dtype=int)
        self.validate()

    def validate(self):
        if np.any(self.sigma_s2 <= 0) or np.any(self.sigma_theta2 <= 0):
            raise ValueError("variance parameters must be positive")
        if self.sigma_u2 <= 0:
            raise ValueError("sigma_u2 must be positive")
        for k in range(2):
            u = self.upsilon[k]
            if not np.allclose(u, u.T, atol=1e-10):
                raise ValueError("upsilon must be symmetric")
            if np.any(np.linalg.eigvalsh(u) <= 0):
                raise ValueError("upsilon must be positive definite")
        if not np.allclose(self.pi.sum(axis=-1), 1.0, atol=1e-8):
            raise ValueError("mixture weights must sum to one per (t, q)")

    @property
    def n_aps(self) -> int:
        return self.beta.shape[0]

    @property
    def n_steps(self) -> int:
        return self.pi.shape[0]

    def copy(self) -> "PropagationParams":
        return PropagationParams(
            beta=self.beta.copy(),
            alpha=self.alpha.copy(),
            sigma_s2=self.sigma_s2.copy(),
            sigma_theta2=self.sigma_theta2.copy(),
            m=self.m.copy(),
            upsilon=self.upsilon.copy(),
            pi=self.pi.copy(),
            assignments=self.assignments.copy(),
            sigma_u2=self.sigma_u2,
        )


@dataclass(frozen=True)
class RegularizationConfig:
    eta: float = 0.0
    neighborhood_radius_m: float = 2.0
    bandwidth_hz: float = 1.0e8

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.neighborhood_radius_m <= 0:
            raise ValueError("neighborhood_radius_m must be positive")


def component_logpdf(
    s, theta, nu, position, ap_position, params: PropagationParams, q: int, k: int
):
    """Log density of the 4-vector [s, theta, s, nu] under component k.

    position may be (2,) or (N, 2); broadcasting returns (N,) values.
    The bearing residual is wrapped to (-pi, pi] before squaring.
    """
    pos = np.atleast_2d(np.asarray(position, dtype=float))
    ap = np.asarray(ap_position, dtype=float)
    diff = pos - ap[None, :]
    d = np.maximum(np.linalg.norm(diff, axis=1), 1e-9)
    mu_s = params.beta[q, k] + params.alpha[q, k] * np.log10(d)
    phi = np.arctan2(diff[:, 1], diff[:, 0])
    r_s = s - mu_s
    r_th = wrap_pi(theta - phi)
    w = np.array([s, nu]) - params.m[k]
    ups = params.upsilon[k]
    det_u = ups[0, 0] * ups[1, 1] - ups[0, 1] * ups[1, 0]
    inv_u = np.array([[ups[1, 1], -ups[0, 1]], [-ups[1, 0], ups[0, 0]]]) / det_u
    maha_w = float(w @ inv_u @ w)
    log_det = (
        np.log(params.sigma_s2[q, k]) + np.log(params.sigma_theta2[k]) + np.log(det_u)
    )
    maha = (
        r_s**2 / params.sigma_s2[q, k]
        + r_th**2 / params.sigma_theta2[k]
        + maha_w
    )
    out = -0.5 * (4.0 * _LOG_2PI + log_det + maha)
    if np.ndim(position) == 1:
        return float(out[0])
    return out


def emission_loglik(
    sig: RadioSignature, position, ap_position, params: PropagationParams
) -> float:
    """Log of the two-component mixture density at one (t, q) signature."""
    pos = np.asarray(position, dtype=float)
    ap = np.asarray(ap_position, dtype=float)
    if np.allclose(pos, ap):
        raise ValueError("position coincides with the AP")
    t, q = sig.time_index, sig.ap_id
    terms = np.array(
        [
            np.log(max(params.pi[t, q, k], 1e-300))
            + component_logpdf(sig.rss_db, sig.aod_rad, sig.spread_db, pos, ap, params, q, k)
            for k in range(2)
        ]
    )
    top = terms.max()
    return float(top + np.log(np.exp(terms - top).sum()))


def emission_loglik_grid(
    table: SignatureTable, positions, ap_positions, params: PropagationParams
) -> np.ndarray:
    """Sum over APs of the mixture log density, for every (t, node) pair.

    Returns an array of shape (T, N).  Vectorized equivalent of summing
    emission_loglik over q at each candidate node.
    """
    pos = np.asarray(positions, dtype=float)
    t_len, q_len = table.rss_db.shape
    n = pos.shape[0]
    total = np.zeros((t_len, n))
    for q in range(q_len):
        ap = np.asarray(ap_positions[q], dtype=float)
        diff = pos - ap[None, :]
        d = np.maximum(np.linalg.norm(diff, axis=1), 1e-9)
        log10_d = np.log10(d)
        phi = np.arctan2(diff[:, 1], diff[:, 0])
        comp = np.empty((2, t_len, n))
        for k in range(2):
            mu_s = params.beta[q, k] + params.alpha[q, k] * log10_d  # (n,)
            r_s = table.rss_db[:, q][:, None] - mu_s[None, :]
            r_th = wrap_pi(table.aod_rad[:, q][:, None] - phi[None, :])
            w = np.column_stack([table.rss_db[:, q], table.spread_db[:, q]]) - params.m[k]
            ups = params.upsilon[k]
            det_u = ups[0, 0] * ups[1, 1] - ups[0, 1] * ups[1, 0]
            inv_u = np.array([[ups[1, 1], -ups[0, 1]], [-ups[1, 0], ups[0, 0]]]) / det_u
            maha_w = np.einsum("ti,ij,tj->t", w, inv_u, w)  # (t,)
            log_det = (
                np.log(params.sigma_s2[q, k])
                + np.log(params.sigma_theta2[k])
                + np.log(det_u)
            )
            comp[k] = -0.5 * (
                4.0 * _LOG_2PI
                + log_det
                + r_s**2 / params.sigma_s2[q, k]
                + r_th**2 / params.sigma_theta2[k]
                + maha_w[:, None]
            ) + np.log(np.maximum(params.pi[:, q, k], 1e-300))[:, None]
        top = comp.max(axis=0)
        total += top + np.log(np.exp(comp - top[None]).sum(axis=0))
    return total


def nlos_neighborhood(
    t: int,
    q: int,
    trajectory: np.ndarray,
    assignments: np.ndarray,
    cfg: RegularizationConfig,
) -> np.ndarray:
    """Indices tau != t sharing the obstructed condition within the radius.

    Empty whenever (t, q) itself is line-of-sight.
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or len(traj) < 1:
        raise ValueError("trajectory must be a (T, 2) array")
    if assignments[t, q] != NLOS:
        return np.empty(0, dtype=int)
    d = np.linalg.norm(traj - traj[t], axis=1)
    mask = (d < cfg.neighborhood_radius_m) & (assignments[:, q] == NLOS)
    mask[t] = False
    return np.nonzero(mask)[0]


class CsiDistanceCache:
    """Lazily filled per-AP table of pairwise lag distances.

    Values are independent of the decoded trajectory, so the cache
    persists across optimization iterations.
    """

    def __init__(self, channels: np.ndarray, half_range: bool = True):
        self.channels = channels
        self.half_range = half_range
        t_len, q_len = channels.shape[:2]
        self._table = np.full((q_len, t_len, t_len), -1, dtype=np.int32)

    def get(self, t: int, tau: int, q: int) -> int:
        val = self._table[q, t, tau]
        if val < 0:
            val = csi_distance(
                self.channels[t, q], self.channels[tau, q], half_range=self.half_range
            )
            self._table[q, t, tau] = val
        return int(val)

    def get_many(self, t: int, taus, q: int) -> np.ndarray:
        return np.array([self.get(t, int(tau), q) for tau in taus], dtype=float)


def spatial_reg_loglik(
    t: int,
    q: int,
    trajectory: np.ndarray,
    channels,
    params: PropagationParams,
    cfg: RegularizationConfig,
    cache: CsiDistanceCache | None = None,
) -> float:
    """Average log density of the lag-distance residuals in the neighborhood.

    Zero when (t, q) is line-of-sight or the neighborhood is empty.
    """
    if params.sigma_u2 <= 0:
        raise ValueError("sigma_u2 must be positive")
    neigh = nlos_neighborhood(t, q, trajectory, params.assignments, cfg)
    if len(neigh) == 0:
        return 0.0
    if cache is None:
        cache = CsiDistanceCache(channels)
    traj = np.asarray(trajectory, dtype=float)
    u_hat = cache.get_many(t, neigh, q)
    d = np.linalg.norm(traj[neigh] - traj[t], axis=1)
    resid = u_hat - (cfg.bandwidth_hz / SPEED_OF_LIGHT) * d
    logpdf = -0.5 * (np.log(2.0 * np.pi * params.sigma_u2) + resid**2 / params.sigma_u2)
    return float(logpdf.mean())


def total_objective(
    trajectory: np.ndarray,
    table: SignatureTable,
    channels,
    params: PropagationParams,
    mobility,
    graph,
    ap_positions,
    cfg: RegularizationConfig,
    cache: CsiDistanceCache | None = None,
) -> float:
    """Regularized log-likelihood of a node trajectory.

    trajectory may be node indices into the graph or raw (T, 2) positions
    already on the graph; ``mobility`` is a MobilityParams instance.
    Emission and transition terms follow the Bayesian factorization, the
    neighborhood term enters with weight eta.
    """
    from .inference.graph import transition_logprob_sequence

    traj = np.asarray(trajectory)
    if traj.ndim == 1:
        nodes = traj.astype(int)
    else:
        nodes = graph.node_index_of(traj)
    positions = graph.nodes[nodes]
    t_len, q_len = table.rss_db.shape
    value = 0.0
    for t in range(t_len):
        for q in range(q_len):
            value += emission_loglik(
                table.at(t, q), positions[t], ap_positions[q], params
            )
    value += transition_logprob_sequence(nodes, graph, mobility)
    if cfg.eta > 0.0:
        if cache is None:
            cache = CsiDistanceCache(channels)
        for t in range(t_len):
            for q in range(q_len):
                value += cfg.eta * spatial_reg_loglik(
                    t, q, positions, channels, params, cfg, cache=cache
                )
    return float(value)


def save_params(path, params: PropagationParams) -> None:
    data = {
        "version": PARAMS_VERSION,
        "beta": params.beta.tolist(),
        "alpha": params.alpha.tolist(),
        "sigma_s2": params.sigma_s2.tolist(),
        "sigma_theta2": params.sigma_theta2.tolist(),
        "m": params.m.tolist(),
        "upsilon": params.upsilon.tolist(),
        "pi": params.pi.tolist(),
        "assignments": params.assignments.tolist(),
        "sigma_u2": params.sigma_u2,
    }
    Path(path).write_text(json.dumps(data))


def load_params(path) -> PropagationParams:
    data = json.loads(Path(path).read_text())
    if data.get("version") != PARAMS_VERSION:
        raise ValueError(f"unsupported params version: {data.get('version')!r}")
    return PropagationParams(
        beta=np.array(data["beta"]),
        alpha=np.array(data["alpha"]),
        sigma_s2=np.array(data["sigma_s2"]),
        sigma_theta2=np.array(data["sigma_theta2"]),
        m=np.array(data["m"]),
        upsilon=np.array(data["upsilon"]),
        pi=np.array(data["pi"]),
        assignments=np.array(data["assignments"]),
        sigma_u2=data["sigma_u2"],
    )
