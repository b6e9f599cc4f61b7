"""Pruned trajectory decoding on the mobility graph.

The walk model conditions each step on two predecessors, so the dynamic
program runs on ordered node pairs (x_{t-1}, x_t); that keeps the search
exact for the second-order chain.  Per-step candidates are the nodes with
the largest product of emission densities (rank pruning); the first two
steps carry emissions only.  The neighborhood regularizer is evaluated
against a reference trajectory from the previous outer iteration, which
keeps each term local to (t, candidate) and preserves the chain structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._geom import SPEED_OF_LIGHT
from ..envsim.types import MobilityParams
from ..features import SignatureTable
from ..obsmodel import (
    NLOS,
    CsiDistanceCache,
    PropagationParams,
    RegularizationConfig,
)
from .graph import MobilityGraph, _kernel_mean, _kernel_var


@dataclass
class TrajectoryEstimate:
    node_indices: np.ndarray  # (T,)
    los_posterior: np.ndarray  # (T, Q), posterior of the line-of-sight condition
    objective: float

    def positions(self, graph: MobilityGraph) -> np.ndarray:
        return graph.nodes[self.node_indices]


def _emission_table(table, graph, ap_positions, params):
    from ..obsmodel import emission_loglik_grid

    return emission_loglik_grid(table, graph.nodes, ap_positions, params)


def _reg_table(
    table, graph, params, reg, prev_positions, cache, candidate_lists
):
    """eta-weighted neighborhood term per (t, candidate), frozen reference.

    For candidate position p at step t and AP q in the obstructed
    condition, the neighborhood is every tau (by the reference trajectory)
    in the same condition with ||p - ref_tau|| below the radius; the term
    averages the lag-residual log densities over it.
    """
    t_len, q_len = table.rss_db.shape
    out = [np.zeros(len(c)) for c in candidate_lists]
    if reg.eta <= 0.0 or prev_positions is None:
        return out
    scale = reg.bandwidth_hz / SPEED_OF_LIGHT
    log_norm = -0.5 * np.log(2.0 * np.pi * params.sigma_u2)
    for q in range(q_len):
        nlos_taus = np.nonzero(params.assignments[:, q] == NLOS)[0]
        if len(nlos_taus) == 0:
            continue
        for t in range(t_len):
            if params.assignments[t, q] != NLOS:
                continue
            taus = nlos_taus[nlos_taus != t]
            if len(taus) == 0:
                continue
            ref_t = prev_positions[taus]
            cand_pos = graph.nodes[candidate_lists[t]]
            d = np.linalg.norm(cand_pos[:, None, :] - ref_t[None, :, :], axis=2)
            mask = d < reg.neighborhood_radius_m
            if not mask.any():
                continue
            u_hat = cache.get_many(t, taus, q)
            resid2 = (u_hat[None, :] - scale * d) ** 2
            logpdf = log_norm - resid2 / (2.0 * params.sigma_u2)
            counts = mask.sum(axis=1)
            sums = np.where(mask, logpdf, 0.0).sum(axis=1)
            has = counts > 0
            out[t][has] += reg.eta * sums[has] / counts[has]
    return out


def _candidates(emissions, top_k):
    t_len, n_nodes = emissions.shape
    out = []
    k = n_nodes if (top_k is None or top_k <= 0) else min(top_k, n_nodes)
    for t in range(t_len):
        if k == n_nodes:
            idx = np.arange(n_nodes)
        else:
            idx = np.argpartition(-emissions[t], k - 1)[:k]
            idx.sort()
        out.append(idx.astype(int))
    return out


def viterbi_solve(
    table: SignatureTable,
    channels,
    graph: MobilityGraph,
    params: PropagationParams,
    mobility: MobilityParams,
    reg: RegularizationConfig,
    prev_trajectory: np.ndarray | None = None,
    top_k: int | None = 200,
    cache: CsiDistanceCache | None = None,
    ap_positions=None,
) -> TrajectoryEstimate:
    """Maximize emissions + second-order transitions + frozen regularizer.

    prev_trajectory: (T, 2) reference positions for the neighborhood term
    (ignored when eta is zero).  top_k <= 0 disables pruning.  Ties break
    toward lower node indices.
    """
    t_len, q_len = table.rss_db.shape
    emissions = _emission_table(table, graph, ap_positions, params)
    cands = _candidates(emissions, top_k)
    if reg.eta > 0.0 and prev_trajectory is not None and cache is None:
        cache = CsiDistanceCache(channels)
    reg_terms = _reg_table(
        table, graph, params, reg, prev_trajectory, cache, cands
    )
    scores = [emissions[t, cands[t]] + reg_terms[t] for t in range(t_len)]

    if t_len == 1:
        best = int(np.argmax(scores[0]))
        nodes = np.array([cands[0][best]])
        return _finish(nodes, table, graph, params, ap_positions, float(scores[0][best]))

    # pair states (i at t-1, j at t); value matrix V[a, b] over candidate lists
    neigh_sets = graph.neighbors
    back = []  # back[t][a, b] = index into cands[t-2] (predecessor n), t >= 2
    c_prev, c_cur = cands[0], cands[1]
    v = np.full((len(c_prev), len(c_cur)), -np.inf)
    for a, i in enumerate(c_prev):
        allowed = np.intersect1d(neigh_sets[i], c_cur, assume_unique=True)
        if len(allowed) == 0:
            continue
        bidx = np.searchsorted(c_cur, allowed)
        v[a, bidx] = scores[0][a] + scores[1][bidx]
    if not np.isfinite(v).any():
        # disconnected candidate sets: fall back to the unpruned neighbor set
        c_cur = np.asarray(
            sorted(set(int(x) for i in c_prev for x in neigh_sets[i])), dtype=int
        )
        cands[1] = c_cur
        scores[1] = emissions[1, c_cur]
        v = np.full((len(c_prev), len(c_cur)), -np.inf)
        for a, i in enumerate(c_prev):
            allowed = np.intersect1d(neigh_sets[i], c_cur, assume_unique=True)
            bidx = np.searchsorted(c_cur, allowed)
            v[a, bidx] = scores[0][a] + scores[1][bidx]

    var = _kernel_var(mobility)
    for t in range(2, t_len):
        c_pp, c_p, c_t = cands[t - 2], cands[t - 1], cands[t]
        while True:
            v_new = np.full((len(c_p), len(c_t)), -np.inf)
            bp = np.full((len(c_p), len(c_t)), -1, dtype=np.int32)
            for a, i in enumerate(c_p):
                live = np.isfinite(v[:, a])
                if not live.any():
                    continue
                succ = np.intersect1d(neigh_sets[i], c_t, assume_unique=True)
                if len(succ) == 0:
                    continue
                neigh_i = neigh_sets[i]
                n_idx = np.nonzero(live)[0]
                means = (
                    _kernel_mean_batch(graph.nodes[i], graph.nodes[c_pp[n_idx]], mobility)
                )  # (s, 2)
                # log kernel over the full neighbor set gives the normalizer
                d2_all = (
                    (graph.nodes[neigh_i][None, :, :] - means[:, None, :]) ** 2
                ).sum(axis=2)
                logker_all = -d2_all / (2.0 * var)
                top = logker_all.max(axis=1, keepdims=True)
                log_z = top[:, 0] + np.log(np.exp(logker_all - top).sum(axis=1))
                succ_pos_in_neigh = np.searchsorted(neigh_i, succ)
                logp = logker_all[:, succ_pos_in_neigh] - log_z[:, None]  # (s, |succ|)
                cand_vals = v[n_idx, a][:, None] + logp
                best = cand_vals.argmax(axis=0)
                bcol = np.searchsorted(c_t, succ)
                v_new[a, bcol] = cand_vals[best, np.arange(len(succ))] + scores[t][bcol]
                bp[a, bcol] = n_idx[best]
            if np.isfinite(v_new).any():
                break
            # every pair is unreachable: widen the candidate set at t
            c_t = np.asarray(
                sorted(set(int(x) for i in c_p for x in neigh_sets[i])), dtype=int
            )
            cands[t] = c_t
            scores[t] = emissions[t, c_t]
        v = v_new
        back.append(bp)

    # backtrack from the best final pair
    flat = int(np.argmax(v))
    a, b = np.unravel_index(flat, v.shape)
    objective = float(v[a, b])
    nodes = np.empty(t_len, dtype=int)
    nodes[t_len - 1] = cands[t_len - 1][b]
    nodes[t_len - 2] = cands[t_len - 2][a]
    for t in range(t_len - 1, 1, -1):
        n_idx = back[t - 2][a, b]
        nodes[t - 2] = cands[t - 2][n_idx]
        a, b = n_idx, a
    return _finish(nodes, table, graph, params, ap_positions, objective)


def _kernel_mean_batch(p_i, p_n_batch, mobility):
    g = mobility.gamma
    return (
        (1.0 + g) * p_i[None, :]
        - g * p_n_batch
        + (1.0 - g) * mobility.slot_s * mobility.mean_velocity[None, :]
    )


def _finish(nodes, table, graph, params, ap_positions, objective):
    from .em import _responsibilities

    positions = graph.nodes[nodes]
    c, _ = _responsibilities(table, positions, ap_positions, params)
    return TrajectoryEstimate(
        node_indices=nodes, los_posterior=c[:, :, 0], objective=objective
    )
