"""Outer loop: alternate trajectory decoding, signature-model fitting, and
the closed-form mobility update until the decoded trajectory repeats."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..envsim.types import MobilityParams
from ..features import SignatureTable
from ..obsmodel import (
    CsiDistanceCache,
    PropagationParams,
    RegularizationConfig,
    total_objective,
)
from .em import EmConfig, em_fit
from .graph import MobilityGraph, fit_mobility
from .viterbi import TrajectoryEstimate, viterbi_solve

log = logging.getLogger(__name__)


@dataclass
class InferenceConfig:
    gamma: float = 0.5
    eta: float = 0.0
    resolution_m: float = 0.5
    d_max_m: float = 2.48
    delta_s: float = 0.2
    zeta_top_k: int = 200
    max_outer_iters: int = 50
    em_tol: float = 1e-6
    seed: int = 0
    neighborhood_m: float = 2.0
    sigma_v_floor: float = 0.1
    em_restarts: int = 5

    @classmethod
    def from_dict(cls, data: dict) -> "InferenceConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class AlternatingResult:
    estimate: TrajectoryEstimate
    params: PropagationParams
    mobility: MobilityParams
    trace: np.ndarray  # objective per outer iteration
    converged: bool
    n_iterations: int
    runtime_s: float = 0.0


def _initial_params(table: SignatureTable, rng: np.random.Generator) -> PropagationParams:
    """Randomized start at data-driven scales."""
    t_len, q_len = table.rss_db.shape
    s = table.rss_db
    nu = table.spread_db
    beta = np.empty((q_len, 2))
    alpha = np.empty((q_len, 2))
    for k in range(2):
        beta[:, k] = s.mean() + rng.normal(0.0, 3.0, q_len)
        alpha[:, k] = -20.0 + rng.normal(0.0, 5.0, q_len)
    sigma_s2 = np.full((q_len, 2), max(s.var(), 1.0))
    lo, hi = np.quantile(nu, [0.25, 0.75])
    m = np.array([[s.mean(), lo], [s.mean(), hi]]) + rng.normal(0.0, 1.0, (2, 2))
    upsilon = np.stack([np.cov(np.column_stack([s.ravel(), nu.ravel()]).T) + np.eye(2)] * 2)
    return PropagationParams(
        beta=beta,
        alpha=alpha,
        sigma_s2=sigma_s2,
        sigma_theta2=np.array([0.05**2, 1.0]),
        m=m,
        upsilon=upsilon,
        pi=np.full((t_len, q_len, 2), 0.5),
        assignments=rng.integers(0, 2, (t_len, q_len)),
        sigma_u2=1.0,
    )


def alternate_optimize(
    table: SignatureTable,
    channels,
    graph: MobilityGraph,
    ap_positions,
    cfg: InferenceConfig,
    bandwidth_hz: float,
    seed: int | None = None,
) -> AlternatingResult:
    """Run the full blind-inference loop.

    Starts from randomized propagation parameters, then repeats
    decode -> refit signature model -> refit mobility until the decoded
    node sequence stops changing or the iteration cap is reached.
    """
    t0 = time.time()
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    reg = RegularizationConfig(
        eta=cfg.eta,
        neighborhood_radius_m=cfg.neighborhood_m,
        bandwidth_hz=bandwidth_hz,
    )
    cache = CsiDistanceCache(channels) if channels is not None else None
    params = _initial_params(table, rng)
    mobility = MobilityParams(
        gamma=cfg.gamma,
        slot_s=cfg.delta_s,
        mean_velocity=np.zeros(2),
        sigma_v=1.0,
    )
    em_cfg = EmConfig(
        tol=cfg.em_tol,
        n_init=cfg.em_restarts,
        seed=int(rng.integers(0, 2**31 - 1)),
    )
    prev_nodes = None
    prev_positions = None
    trace = []
    converged = False
    estimate = None
    for it in range(cfg.max_outer_iters):
        estimate = viterbi_solve(
            table,
            channels,
            graph,
            params,
            mobility,
            reg,
            prev_trajectory=prev_positions,
            top_k=cfg.zeta_top_k,
            cache=cache,
            ap_positions=ap_positions,
        )
        positions = estimate.positions(graph)
        params, _ = em_fit(
            table,
            channels,
            positions,
            ap_positions,
            cfg=em_cfg,
            reg_cfg=reg,
            cache=cache,
        )
        v_bar, sigma_v2 = fit_mobility(positions, cfg.gamma, cfg.delta_s)
        mobility = MobilityParams(
            gamma=cfg.gamma,
            slot_s=cfg.delta_s,
            mean_velocity=v_bar,
            sigma_v=max(np.sqrt(sigma_v2), cfg.sigma_v_floor),
        )
        objective = total_objective(
            estimate.node_indices,
            table,
            channels,
            params,
            mobility,
            graph,
            ap_positions,
            reg,
            cache=cache,
        )
        trace.append(objective)
        log.info("outer iteration %d: objective %.4f", it + 1, objective)
        if prev_nodes is not None and np.array_equal(prev_nodes, estimate.node_indices):
            converged = True
            break
        prev_nodes = estimate.node_indices.copy()
        prev_positions = positions
    return AlternatingResult(
        estimate=estimate,
        params=params,
        mobility=mobility,
        trace=np.array(trace),
        converged=converged,
        n_iterations=len(trace),
        runtime_s=time.time() - t0,
    )
