"""Observables extracted from channel tensors.

Four features drive the inference pipeline: received signal strength,
the dominant departure angle (subspace pseudo-spectrum search), a
delay-spread statistic of the normalized channel magnitude, and a pairwise
lag-correlation distance between channels.  A normalized power-angular-delay
profile distance is included as a benchmark.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._geom import wrap_2pi
from .envsim.channel import channel_entries
from .envsim.types import ArrayGeometry

SPREAD_FLOOR_DB = -120.0


@dataclass(frozen=True)
class RadioSignature:
    rss_db: float
    aod_rad: float
    spread_db: float
    ap_id: int = 0
    time_index: int = 0


@dataclass
class SignatureTable:
    """Per-(t, q) feature arrays for a whole measurement run."""

    rss_db: np.ndarray  # (T, Q)
    aod_rad: np.ndarray  # (T, Q)
    spread_db: np.ndarray  # (T, Q)

    @property
    def n_steps(self):
        return self.rss_db.shape[0]

    @property
    def n_aps(self):
        return self.rss_db.shape[1]

    def at(self, t: int, q: int) -> RadioSignature:
        return RadioSignature(
            rss_db=float(self.rss_db[t, q]),
            aod_rad=float(self.aod_rad[t, q]),
            spread_db=float(self.spread_db[t, q]),
            ap_id=q,
            time_index=t,
        )


def rss(h) -> float:
    """Channel power in dB: 10 log10 of the squared Frobenius norm."""
    ent = channel_entries(h)
    power = float(np.sum(np.abs(ent) ** 2))
    if power <= 0.0:
        raise ValueError("all-zero channel has no defined RSS")
    return 10.0 * np.log10(power)


def _sine_grid(n_grid: int, sin_limit: float) -> np.ndarray:
    if n_grid % 2 == 0:
        n_grid += 1
    s = np.linspace(-sin_limit, sin_limit, n_grid)
    s[n_grid // 2] = 0.0  # broadside exactly on the grid
    return np.arcsin(s)


def _step_grid(grid_step: float) -> np.ndarray:
    upper = np.arange(grid_step, np.pi / 2 - 1e-9, grid_step)
    return np.concatenate([-upper[::-1], [0.0], upper])


def aod_estimate(
    h,
    geom: ArrayGeometry,
    grid_step: float | None = None,
    n_grid: int = 1025,
    sin_limit: float = 0.995,
) -> float:
    """Dominant departure azimuth via a noise-subspace pseudo-spectrum.

    The sample covariance (1/M) H H^H is eigendecomposed; all eigenvectors
    except the dominant one span the noise subspace U, and the relative
    angle maximizing 1 / ||U^H a(phi)||^2 is searched on a grid (uniform in
    sin(phi) by default, uniform in angle when grid_step is given).
    Returns the global azimuth (relative angle plus array boresight),
    wrapped to [0, 2pi).
    """
    ent = channel_entries(h)
    n_t, m = ent.shape
    if n_t < 2:
        raise ValueError("need at least two antennas")
    if grid_step is not None and grid_step <= 0:
        raise ValueError("grid_step must be positive")
    cov = ent @ ent.conj().T / m
    if not np.isfinite(cov).all() or np.linalg.norm(cov) <= 0.0:
        raise ValueError("degenerate channel covariance")
    _, vecs = np.linalg.eigh(cov)  # ascending eigenvalues
    noise = vecs[:, : n_t - 1]
    grid = _step_grid(grid_step) if grid_step is not None else _sine_grid(n_grid, sin_limit)
    n = np.arange(n_t)[:, None]
    steer = np.exp(-2j * np.pi / geom.wavelength * geom.spacing * n * np.sin(grid)[None, :])
    proj = noise.conj().T @ steer
    denom = np.sum(np.abs(proj) ** 2, axis=0)
    phi_hat = grid[int(np.argmin(denom))]
    return wrap_2pi(phi_hat + geom.reference_angle)


def pseudo_spectrum(h, geom: ArrayGeometry, angles) -> np.ndarray:
    """Pseudo-spectrum values 1 / ||U^H a(phi)||^2 at given relative angles."""
    ent = channel_entries(h)
    n_t, m = ent.shape
    cov = ent @ ent.conj().T / m
    _, vecs = np.linalg.eigh(cov)
    noise = vecs[:, : n_t - 1]
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    n = np.arange(n_t)[:, None]
    steer = np.exp(-2j * np.pi / geom.wavelength * geom.spacing * n * np.sin(angles)[None, :])
    denom = np.sum(np.abs(noise.conj().T @ steer) ** 2, axis=0)
    return 1.0 / np.maximum(denom, 1e-300)


def delay_spread_feature(h) -> float:
    """10 log10 of the variance of |H| after Frobenius normalization.

    Flat magnitude (a single dominant path) gives variance zero; the value
    is floored at -120 dB.
    """
    ent = channel_entries(h)
    norm = np.linalg.norm(ent)
    if norm <= 0.0:
        raise ValueError("all-zero channel has no defined delay spread")
    var = float(np.var(np.abs(ent / norm)))
    if var <= 10.0 ** (SPREAD_FLOOR_DB / 10.0):
        return SPREAD_FLOOR_DB
    return max(10.0 * np.log10(var), SPREAD_FLOOR_DB)


_PHASE_CACHE: dict = {}


def _phase_matrix(m: int) -> np.ndarray:
    """W[u, k] = exp(+j 2 pi k u / m), with W[m-u] the exact conjugate of W[u].

    The mirrored construction makes the lag-reversal identity
    |W r*|[u] == |W r|[(m-u) % m] hold bitwise.
    """
    w = _PHASE_CACHE.get(m)
    if w is None:
        w = np.empty((m, m), dtype=complex)
        k = np.arange(m)
        for u in range(m // 2 + 1):
            w[u] = np.exp(2j * np.pi * k * u / m)
        for u in range(m // 2 + 1, m):
            w[u] = np.conj(w[m - u])
        _PHASE_CACHE[m] = w
    return w


def csi_lag_correlation(h_i, h_j) -> np.ndarray:
    """Antenna-averaged lag-domain correlation magnitudes over u = 0..M-1."""
    a = channel_entries(h_i)
    b = channel_entries(h_j)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    n_t, m = a.shape
    r = np.einsum("nm,nm->m", a, b.conj())
    return np.abs(_phase_matrix(m) @ r) / (n_t * m)


def csi_distance(h_i, h_j, half_range: bool = False) -> int:
    """Lag bin maximizing the antenna-averaged channel correlation.

    Ties break toward the smaller bin.  With half_range=True the search is
    restricted to u <= M/2 (larger lags alias onto negative displacements).
    """
    vals = csi_lag_correlation(h_i, h_j)
    m = len(vals)
    if half_range:
        vals = vals[: m // 2 + 1]
    return int(np.argmax(vals))


def padp(h, dict_size: int | None = None, geom: ArrayGeometry | None = None,
         spacing_over_lambda: float = 0.5) -> np.ndarray:
    """Normalized power-angular-delay profile |D^H H F^H| / ||.||_F.

    D is an overcomplete steering dictionary on a uniform sin-angle grid
    (dict_size columns, default 8 N_t); F is the unitary M-point DFT.
    """
    ent = channel_entries(h)
    n_t, m = ent.shape
    if dict_size is None:
        dict_size = 8 * n_t
    ratio = geom.spacing / geom.wavelength if geom is not None else spacing_over_lambda
    s = np.linspace(-1.0, 1.0, dict_size, endpoint=False)
    n = np.arange(n_t)[:, None]
    d = np.exp(-2j * np.pi * ratio * n * s[None, :])
    f = np.fft.fft(np.eye(m)) / np.sqrt(m)
    g = np.abs(d.conj().T @ ent @ f.conj().T)
    norm = np.linalg.norm(g)
    if norm <= 0.0:
        raise ValueError("all-zero channel has no defined profile")
    return g / norm


def padp_distance(h_i, h_j, dict_size: int | None = None,
                  geom: ArrayGeometry | None = None) -> float:
    """Frobenius distance between normalized power-angular-delay profiles."""
    a = channel_entries(h_i)
    b = channel_entries(h_j)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(padp(a, dict_size, geom) - padp(b, dict_size, geom)))


def extract_signatures(dataset, grid_step: float | None = None, n_grid: int = 1025) -> SignatureTable:
    """Per-(t, q) features for a whole dataset."""
    t_len, q_len = dataset.channels.shape[:2]
    out_rss = np.empty((t_len, q_len))
    out_aod = np.empty((t_len, q_len))
    out_spread = np.empty((t_len, q_len))
    for q in range(q_len):
        geom = ArrayGeometry(
            n_antennas=dataset.n_antennas,
            spacing=dataset.spacing,
            carrier_hz=dataset.carrier_hz,
            reference_angle=float(dataset.reference_angles[q]),
        )
        for t in range(t_len):
            h = dataset.channels[t, q]
            out_rss[t, q] = rss(h)
            out_aod[t, q] = aod_estimate(h, geom, grid_step=grid_step, n_grid=n_grid)
            out_spread[t, q] = delay_spread_feature(h)
    return SignatureTable(rss_db=out_rss, aod_rad=out_aod, spread_db=out_spread)


def signatures_to_csv(table: SignatureTable, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "q", "rss_db", "aod_rad", "spread_db"])
        for t in range(table.n_steps):
            for q in range(table.n_aps):
                w.writerow(
                    [t, q, repr(table.rss_db[t, q]), repr(table.aod_rad[t, q]),
                     repr(table.spread_db[t, q])]
                )


def pairwise_distances_to_csv(dataset, pairs, path, half_range: bool = True) -> None:
    """CSV of (i, j, q, u_hat) for the requested (i, j, q) triples."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "q", "u_hat"])
        for i, j, q in pairs:
            u = csi_distance(dataset.channels[i, q], dataset.channels[j, q], half_range=half_range)
            w.writerow([i, j, q, u])
