"""Discrete mobility graph and second-order transition probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .._geom import polygon_grid
from ..envsim.types import MobilityParams

_VAR_FLOOR = 1e-12


@dataclass
class MobilityGraph:
    nodes: np.ndarray  # (K, 2)
    neighbors: list  # per node: sorted int array, includes the node itself
    region: np.ndarray  # polygon
    resolution: float
    d_max: float
    _tree: cKDTree = None

    def __post_init__(self):
        if self._tree is None:
            self._tree = cKDTree(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def nearest_node(self, position) -> int:
        return int(self._tree.query(np.asarray(position, dtype=float))[1])

    def node_index_of(self, positions) -> np.ndarray:
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        return self._tree.query(pos)[1].astype(int)

    def nodes_within(self, position, radius) -> np.ndarray:
        return np.asarray(
            sorted(self._tree.query_ball_point(np.asarray(position, float), radius)),
            dtype=int,
        )


def build_graph(region, resolution_m: float, d_max_m: float) -> MobilityGraph:
    """Uniform grid clipped to the region, edges within the per-slot reach.

    Every node is its own neighbor; adjacency is symmetric by construction.
    """
    if resolution_m <= 0:
        raise ValueError("resolution must be positive")
    if d_max_m <= 0:
        raise ValueError("d_max must be positive")
    nodes = polygon_grid(region, resolution_m)
    if len(nodes) == 0:
        raise ValueError("empty region")
    tree = cKDTree(nodes)
    pairs = tree.query_ball_tree(tree, d_max_m + 1e-12)
    neighbors = [np.asarray(sorted(p), dtype=int) for p in pairs]
    return MobilityGraph(
        nodes=nodes,
        neighbors=neighbors,
        region=np.asarray(region, dtype=float),
        resolution=resolution_m,
        d_max=d_max_m,
        _tree=tree,
    )


def _kernel_mean(p_i, p_n, mobility: MobilityParams):
    """Mean of x_t implied by the two predecessors under the walk model."""
    g = mobility.gamma
    return (1.0 + g) * p_i - g * p_n + (1.0 - g) * mobility.slot_s * mobility.mean_velocity


def _kernel_var(mobility: MobilityParams) -> float:
    g = mobility.gamma
    if g >= 1.0:
        raise ValueError("transition kernel undefined at gamma = 1 (degenerate walk)")
    return max(
        (1.0 - g * g) * mobility.slot_s**2 * mobility.sigma_v**2, _VAR_FLOOR
    )


def transition_logprob(
    j: int, i: int, n: int, graph: MobilityGraph, mobility: MobilityParams
) -> float:
    """log P(node j | previous i, pre-previous n), normalized over N_i.

    Returns -inf for j outside the neighbor set of i.
    """
    neigh = graph.neighbors[i]
    if j not in set(neigh.tolist()):
        return -np.inf
    var = _kernel_var(mobility)
    mean = _kernel_mean(graph.nodes[i], graph.nodes[n], mobility)
    d2 = ((graph.nodes[neigh] - mean) ** 2).sum(axis=1)
    logker = -d2 / (2.0 * var)
    top = logker.max()
    log_z = top + np.log(np.exp(logker - top).sum())
    jpos = int(np.searchsorted(neigh, j))
    return float(logker[jpos] - log_z)


def transition_logprob_table(
    i: int, n: int, graph: MobilityGraph, mobility: MobilityParams
) -> tuple:
    """(neighbor ids, log P(. | i, n)) for all neighbors of i at once."""
    neigh = graph.neighbors[i]
    var = _kernel_var(mobility)
    mean = _kernel_mean(graph.nodes[i], graph.nodes[n], mobility)
    d2 = ((graph.nodes[neigh] - mean) ** 2).sum(axis=1)
    logker = -d2 / (2.0 * var)
    top = logker.max()
    log_z = top + np.log(np.exp(logker - top).sum())
    return neigh, logker - log_z


def transition_logprob_sequence(
    nodes, graph: MobilityGraph, mobility: MobilityParams
) -> float:
    """Sum of log P(x_t | x_{t-1}, x_{t-2}) over t >= 3 (1-based), i.e.
    from the third element of the sequence on."""
    nodes = np.asarray(nodes, dtype=int)
    total = 0.0
    for t in range(2, len(nodes)):
        total += transition_logprob(
            int(nodes[t]), int(nodes[t - 1]), int(nodes[t - 2]), graph, mobility
        )
    return float(total)


def fit_mobility(trajectory: np.ndarray, gamma: float, delta: float):
    """Closed-form mean velocity and innovation variance from a trajectory.

    Residuals r_t = x_t - (1+gamma) x_{t-1} + gamma x_{t-2} satisfy
    r_t = (1-gamma) delta vbar + noise; vbar is their scaled mean and
    sigma_v^2 the per-axis variance of what remains.  At gamma = 1 the
    vbar normalization is singular and the first-difference mean is used.
    """
    traj = np.asarray(trajectory, dtype=float)
    t_len = len(traj)
    if t_len < 3:
        raise ValueError("need at least three positions")
    resid = traj[2:] - (1.0 + gamma) * traj[1:-1] + gamma * traj[:-2]
    if gamma >= 1.0:
        v_bar = np.diff(traj, axis=0).mean(axis=0) / delta
    else:
        v_bar = resid.sum(axis=0) / ((t_len - 2) * (1.0 - gamma) * delta)
    centered = resid - (1.0 - gamma) * delta * v_bar
    sigma_v2 = float((centered**2).sum() / (2.0 * (t_len - 2) * delta**2))
    return v_bar, sigma_v2
