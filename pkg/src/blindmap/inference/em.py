"""Expectation-maximization fit of the two-condition signature model.

Given a fixed trajectory, alternates posterior condition probabilities
with closed-form parameter updates: responsibility-weighted least squares
for the per-AP path-loss lines, weighted moments for the remaining
variances, and a shared mixture weight.  Initialization is a two-means
split of the (s, nu) pairs; several restarts keep the best likelihood.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .._geom import SPEED_OF_LIGHT, wrap_pi
from ..features import SignatureTable
from ..obsmodel import (
    LOS,
    NLOS,
    CsiDistanceCache,
    PropagationParams,
    RegularizationConfig,
    nlos_neighborhood,
)

log = logging.getLogger(__name__)

_VAR_FLOOR = 1e-8
# dB-scale blocks keep at least half a dB of dispersion so a component
# cannot collapse needle-like onto a handful of points
DB_VAR_FLOOR = 0.25
# bearing-variance floors: the line-of-sight component can never be more
# accurate than the estimator's grid scale (~3 deg), and obstructed
# bearings disperse broadly (>= ~18 deg).  Without them a two-component
# fit of single-condition data splits arbitrarily instead of collapsing
# onto component 0.
LOS_BEARING_VAR_FLOOR = 0.0025
NLOS_BEARING_VAR_FLOOR = 0.1
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class EmConfig:
    tol: float = 1e-6
    max_iters: int = 200
    n_init: int = 5
    seed: int = 0


def _two_means(pts: np.ndarray, rng: np.random.Generator, iters: int = 25) -> np.ndarray:
    """Hard 2-way split of (N, 2) points; returns labels in {0, 1}."""
    scale = pts.std(axis=0)
    scale[scale == 0] = 1.0
    z = pts / scale
    centers = z[rng.choice(len(z), size=2, replace=False)]
    labels = np.zeros(len(z), dtype=int)
    for _ in range(iters):
        d = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = d.argmin(axis=1)
        if np.array_equal(new, labels) and _ > 0:
            break
        labels = new
        for k in range(2):
            if np.any(labels == k):
                centers[k] = z[labels == k].mean(axis=0)
    return labels


def _mixture_logpdfs(table, positions, ap_positions, params):
    """Component log densities, shape (2, T, Q), including mixture weights."""
    t_len, q_len = table.rss_db.shape
    out = np.empty((2, t_len, q_len))
    for q in range(q_len):
        ap = np.asarray(ap_positions[q], dtype=float)
        diff = positions - ap[None, :]
        d = np.maximum(np.linalg.norm(diff, axis=1), 1e-9)
        log10_d = np.log10(d)
        phi = np.arctan2(diff[:, 1], diff[:, 0])
        s = table.rss_db[:, q]
        th = table.aod_rad[:, q]
        nu = table.spread_db[:, q]
        w = np.column_stack([s, nu])
        for k in range(2):
            mu_s = params.beta[q, k] + params.alpha[q, k] * log10_d
            r_s = s - mu_s
            r_th = wrap_pi(th - phi)
            ups = params.upsilon[k]
            det_u = ups[0, 0] * ups[1, 1] - ups[0, 1] * ups[1, 0]
            inv_u = np.array([[ups[1, 1], -ups[0, 1]], [-ups[1, 0], ups[0, 0]]]) / det_u
            wc = w - params.m[k]
            maha_w = np.einsum("ti,ij,tj->t", wc, inv_u, wc)
            log_det = (
                np.log(params.sigma_s2[q, k])
                + np.log(params.sigma_theta2[k])
                + np.log(det_u)
            )
            out[k, :, q] = (
                -0.5
                * (
                    4.0 * _LOG_2PI
                    + log_det
                    + r_s**2 / params.sigma_s2[q, k]
                    + r_th**2 / params.sigma_theta2[k]
                    + maha_w
                )
                + np.log(np.maximum(params.pi[:, q, k], 1e-300))
            )
    return out


def mixture_loglik(table, positions, ap_positions, params) -> float:
    comp = _mixture_logpdfs(table, positions, ap_positions, params)
    top = comp.max(axis=0)
    return float((top + np.log(np.exp(comp - top[None]).sum(axis=0))).sum())


def _responsibilities(table, positions, ap_positions, params):
    comp = _mixture_logpdfs(table, positions, ap_positions, params)
    top = comp.max(axis=0)
    lse = top + np.log(np.exp(comp - top[None]).sum(axis=0))
    c = np.exp(comp - lse[None])
    return np.moveaxis(c, 0, -1), float(lse.sum())  # (T, Q, 2), loglik


def _wls_pathloss(log10_d, s, w):
    """Weighted least squares for s = beta + alpha * log10(d)."""
    wsum = w.sum()
    if wsum <= 1e-12:
        return float(s.mean()), 0.0
    active = w > 1e-9 * wsum
    # collapse to a weighted mean when all effective distances coincide
    if not np.any(active) or np.ptp(log10_d[active]) < 1e-9:
        return float((w * s).sum() / wsum), 0.0
    sw = np.sqrt(w)
    design = np.column_stack([np.ones_like(log10_d), log10_d]) * sw[:, None]
    sol, *_ = np.linalg.lstsq(design, s * sw, rcond=None)
    return float(sol[0]), float(sol[1])


def _starvation_threshold(t_len: int, q_len: int) -> float:
    # a component needs at least as many effective points as it has free
    # parameters (3 per AP plus 6 shared); capped for tiny datasets
    return min(3.0 * q_len + 6.0, max(2.0, 0.04 * t_len * q_len))


def _reinit_component(params, k: int) -> None:
    other = 1 - k
    params.beta[:, k] = params.beta[:, other] + 1.0
    params.alpha[:, k] = params.alpha[:, other]
    params.sigma_s2[:, k] = params.sigma_s2[:, other] * 2.0
    params.sigma_theta2[k] = params.sigma_theta2[other] * 2.0
    params.m[k] = params.m[other] + 1.0
    params.upsilon[k] = params.upsilon[other] * 2.0


def _m_step(table, positions, ap_positions, c, params, dead=(False, False)):
    """Closed-form updates; returns the per-component starvation flags."""
    t_len, q_len = table.rss_db.shape
    s = table.rss_db
    th = table.aod_rad
    nu = table.spread_db
    w_feats = np.stack([s, nu], axis=-1)  # (T, Q, 2)
    eps_mass = _starvation_threshold(t_len, q_len)
    starved = [False, False]
    for k in range(2):
        if dead[k]:
            continue
        ck = c[:, :, k]
        mass = ck.sum()
        if mass < eps_mass:
            starved[k] = True
            log.warning(
                "component %d starved (mass %.2f < %.2f); reinitializing", k, mass, eps_mass
            )
            _reinit_component(params, k)
            continue
        params.m[k] = (ck[:, :, None] * w_feats).sum(axis=(0, 1)) / mass
        wc = w_feats - params.m[k]
        ups = np.einsum("tq,tqi,tqj->ij", ck, wc, wc) / mass
        lift = max(DB_VAR_FLOOR - float(np.linalg.eigvalsh(ups).min()), 0.0)
        params.upsilon[k] = ups + lift * np.eye(2)
        theta_sq = 0.0
        for q in range(q_len):
            ap = np.asarray(ap_positions[q], dtype=float)
            diff = positions - ap[None, :]
            d = np.maximum(np.linalg.norm(diff, axis=1), 1e-9)
            log10_d = np.log10(d)
            phi = np.arctan2(diff[:, 1], diff[:, 0])
            beta, alpha = _wls_pathloss(log10_d, s[:, q], ck[:, q])
            params.beta[q, k] = beta
            params.alpha[q, k] = alpha
            r_s = s[:, q] - beta - alpha * log10_d
            qmass = ck[:, q].sum()
            params.sigma_s2[q, k] = max(
                float((ck[:, q] * r_s**2).sum() / max(qmass, 1e-12)), DB_VAR_FLOOR
            )
            theta_sq += float((ck[:, q] * wrap_pi(th[:, q] - phi) ** 2).sum())
        floor = NLOS_BEARING_VAR_FLOOR if k == NLOS else LOS_BEARING_VAR_FLOOR
        params.sigma_theta2[k] = max(theta_sq / mass, floor)
    shared_pi = c.sum(axis=(0, 1)) / (t_len * q_len)
    for k in range(2):
        if dead[k]:
            shared_pi[k] = 0.0
    shared_pi = np.clip(shared_pi, 1e-8, 1.0)
    shared_pi = shared_pi / shared_pi.sum()
    params.pi[:, :, :] = shared_pi[None, None, :]
    return starved


def _init_params(table, positions, ap_positions, rng) -> PropagationParams:
    t_len, q_len = table.rss_db.shape
    pts = np.column_stack([table.rss_db.ravel(), table.spread_db.ravel()])
    labels = _two_means(pts, rng).reshape(t_len, q_len)
    # component 0 starts as the flatter-channel (lower spread) cluster
    flat = labels.ravel()
    if np.any(flat == 0) and np.any(flat == 1):
        if pts[flat == 0, 1].mean() > pts[flat == 1, 1].mean():
            labels = 1 - labels
    c = np.zeros((t_len, q_len, 2))
    c[:, :, 0] = (labels == 0) * 0.9 + 0.05
    c[:, :, 1] = 1.0 - c[:, :, 0]
    params = PropagationParams(
        beta=np.zeros((q_len, 2)),
        alpha=np.zeros((q_len, 2)),
        sigma_s2=np.ones((q_len, 2)),
        sigma_theta2=np.array([0.01, 1.0]),
        m=np.zeros((2, 2)),
        upsilon=np.stack([np.eye(2), np.eye(2)]),
        pi=np.full((t_len, q_len, 2), 0.5),
        assignments=labels.copy(),
        sigma_u2=1.0,
    )
    _m_step(table, positions, ap_positions, c, params)
    # jitter for restart diversity
    params.beta += rng.normal(0.0, 0.5, params.beta.shape)
    return params


def _finalize_sigma_u2(channels, positions, params, reg_cfg, cache):
    """Residual variance of the lag-distance model over all neighborhoods."""
    if channels is None or reg_cfg is None:
        return 1.0, 0
    t_len, q_len = params.assignments.shape
    total = 0.0
    count = 0
    for t in range(t_len):
        for q in range(q_len):
            neigh = nlos_neighborhood(t, q, positions, params.assignments, reg_cfg)
            if len(neigh) == 0:
                continue
            u_hat = cache.get_many(t, neigh, q)
            d = np.linalg.norm(positions[neigh] - positions[t], axis=1)
            resid = u_hat - (reg_cfg.bandwidth_hz / SPEED_OF_LIGHT) * d
            total += float((resid**2).sum())
            count += len(neigh)
    if count == 0:
        return 1.0, 0
    return max(total / count, _VAR_FLOOR), count


def em_fit(
    table: SignatureTable,
    channels,
    positions: np.ndarray,
    ap_positions,
    cfg: EmConfig | None = None,
    reg_cfg: RegularizationConfig | None = None,
    cache: CsiDistanceCache | None = None,
    return_trace: bool = False,
):
    """Fit PropagationParams for a fixed trajectory.

    positions: (T, 2) decoded or ground-truth locations.  Restarts keep
    the best final likelihood; the trace of the winning run is returned
    on request.  After convergence, hard condition assignments are the
    posterior argmax and sigma_u2 is the neighborhood residual variance
    (1.0 when no neighborhoods exist).
    """
    cfg = cfg or EmConfig()
    positions = np.asarray(positions, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    best = None
    best_ll = -np.inf
    best_trace = None
    for _ in range(cfg.n_init):
        params = _init_params(table, positions, ap_positions, rng)
        trace = []
        prev_ll = -np.inf
        starve_counts = [0, 0]
        dead = [False, False]
        for _it in range(cfg.max_iters):
            c, ll = _responsibilities(table, positions, ap_positions, params)
            trace.append(ll)
            if abs(ll - prev_ll) < cfg.tol:
                break
            prev_ll = ll
            starved = _m_step(table, positions, ap_positions, c, params, dead=dead)
            for k in range(2):
                if starved[k]:
                    starve_counts[k] += 1
                    if starve_counts[k] >= 2 and not dead[k]:
                        # repeated starvation: the data supports one
                        # condition only; extinguish the component
                        log.warning("component %d extinguished", k)
                        dead[k] = True
                        params.pi[:, :, k] = 1e-8
                        params.pi[:, :, 1 - k] = 1.0 - 1e-8
        c, ll = _responsibilities(table, positions, ap_positions, params)
        if ll > best_ll:
            best_ll = ll
            best = (params, c)
            best_trace = trace
    params, c = best
    _order_components(params)
    c, _ = _responsibilities(table, positions, ap_positions, params)
    params.assignments = c.argmax(axis=2)
    if cache is None and channels is not None:
        cache = CsiDistanceCache(channels)
    params.sigma_u2, _ = _finalize_sigma_u2(channels, positions, params, reg_cfg, cache)
    if return_trace:
        return params, c, np.array(best_trace)
    return params, c


def _order_components(params: PropagationParams) -> None:
    """Keep component 0 as the tight-bearing (line-of-sight) one."""
    if params.sigma_theta2[LOS] <= params.sigma_theta2[NLOS]:
        return
    params.beta = params.beta[:, ::-1].copy()
    params.alpha = params.alpha[:, ::-1].copy()
    params.sigma_s2 = params.sigma_s2[:, ::-1].copy()
    params.sigma_theta2 = params.sigma_theta2[::-1].copy()
    params.m = params.m[::-1].copy()
    params.upsilon = params.upsilon[::-1].copy()
    params.pi = params.pi[:, :, ::-1].copy()
    params.assignments = 1 - params.assignments
