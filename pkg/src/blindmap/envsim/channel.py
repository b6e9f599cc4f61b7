"""MIMO-OFDM channel synthesis from the image lattice.

H[n, m] = sum_l kappa_l * exp(-j 2 pi (m/M) B tau_l) * a_n(phi_l)

with a(phi) the ULA steering vector for the relative departure angle phi.
Paths arriving outside the array's front hemisphere are discarded (arrays
are wall-mounted with a rear panel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._geom import SPEED_OF_LIGHT, azimuth, wrap_2pi, wrap_pi
from .lattice import MirrorLattice, trace_cluster
from .types import ArrayGeometry, EnvironmentModel, OfdmConfig


class CoverageGapError(ValueError):
    """No propagation path reaches the requested position."""


def steering_vector(aod_relative: float, geom: ArrayGeometry) -> np.ndarray:
    """ULA response for a relative departure angle in (-pi/2, pi/2).

    Entry n is exp(-j (2 pi / lambda) n spacing sin(aod));  entry 0 is 1.
    """
    if not (-np.pi / 2 < aod_relative < np.pi / 2):
        raise ValueError("relative departure angle must lie in (-pi/2, pi/2)")
    n = np.arange(geom.n_antennas)
    phase = -2.0 * np.pi / geom.wavelength * geom.spacing * np.sin(aod_relative)
    return np.exp(1j * phase * n)


@dataclass(frozen=True)
class Path:
    gain: complex
    delay_s: float
    aod_rad: float  # global azimuth of departure at the AP
    is_los: bool
    source_cluster_id: int


@dataclass(frozen=True)
class PathSet:
    paths: tuple

    def __post_init__(self):
        if any(p.delay_s < 0 for p in self.paths):
            raise ValueError("path delays must be >= 0")
        if sum(1 for p in self.paths if p.is_los) > 1:
            raise ValueError("at most one LOS path")
        object.__setattr__(self, "paths", tuple(self.paths))

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


@dataclass(frozen=True)
class ChannelTensor:
    entries: np.ndarray  # (n_antennas, n_subcarriers) complex
    ap_id: int = 0
    time_index: int = 0

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=complex)
        if not np.all(np.isfinite(ent)):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "entries", ent)

    @property
    def shape(self):
        return self.entries.shape


def channel_entries(h) -> np.ndarray:
    """Accept a ChannelTensor or a bare complex array."""
    return np.asarray(getattr(h, "entries", h))


def assemble_channel(
    paths: PathSet,
    geom: ArrayGeometry,
    ofdm: OfdmConfig,
    ap_id: int = 0,
    time_index: int = 0,
    tap_delay: bool = False,
) -> ChannelTensor:
    """Sum path contributions into an (N_t, M) tensor.

    With tap_delay=True, delays are rounded to multiples of 1/B first.
    """
    m = np.arange(ofdm.n_subcarriers)
    h = np.zeros((geom.n_antennas, ofdm.n_subcarriers), dtype=complex)
    for p in paths:
        rel = wrap_pi(p.aod_rad - geom.reference_angle)
        if not (-np.pi / 2 < rel < np.pi / 2):
            continue
        tau = p.delay_s
        if tap_delay:
            tau = round(tau * ofdm.bandwidth_hz) / ofdm.bandwidth_hz
        ramp = np.exp(-2j * np.pi * (m / ofdm.n_subcarriers) * ofdm.bandwidth_hz * tau)
        h += p.gain * np.outer(steering_vector(rel, geom), ramp)
    return ChannelTensor(entries=h, ap_id=ap_id, time_index=time_index)


def _cluster_subpaths(env, lattice, cluster, position, offsets, phases, carrier_phase):
    """Realize a cluster's sub-paths at one receiver position.

    offsets: (n_v, 2) standard-normal jitter, shared across positions so the
    virtual transmitters stay put as the receiver moves.  Returns a list of
    Path objects (empty when the cluster is invisible).
    """
    trace = trace_cluster(env, lattice, cluster.cluster_id, position)
    if trace is None:
        return []
    x = np.asarray(position, dtype=float)
    center = trace["virtual_tx"]
    base_aod = trace["departure"]
    base_dist = float(np.linalg.norm(center - x))
    if base_dist < 1e-9:
        return []
    n_v = cluster.n_virtual_tx
    sigma = cluster.angular_spread * base_dist if cluster.kind == "mirror" else 0.0
    paths = []
    norm = 1.0 / np.sqrt(n_v)
    for i in range(n_v):
        vtx = center + sigma * offsets[i]
        dist = float(np.linalg.norm(vtx - x))
        if dist < 1e-9:
            continue
        # departure deviation mirrors the virtual TX's angular offset seen from the RX
        delta = wrap_pi(azimuth(x, vtx) - azimuth(x, center))
        tau = dist / SPEED_OF_LIGHT
        mag = cluster.absorption_factor / dist * norm
        phase = phases[i]
        if carrier_phase:
            phase = phase - 2.0 * np.pi * env.ap_geometry(lattice.ap_id).carrier_hz * tau
        paths.append(
            Path(
                gain=mag * np.exp(1j * phase),
                delay_s=tau,
                aod_rad=wrap_2pi(base_aod + delta),
                is_los=cluster.is_source,
                source_cluster_id=cluster.cluster_id,
            )
        )
    return paths


class ChannelSampler:
    """Frozen realization of the scattering ensemble for one environment.

    Virtual-transmitter jitter and per-sub-path phases are drawn once at
    construction, so channels sampled along a trajectory vary smoothly
    with position: the same scatterers are seen from every point.  Calls
    are pure given the constructed state; additive receiver noise uses the
    rng passed per call.
    """

    def __init__(
        self,
        env: EnvironmentModel,
        ofdm: OfdmConfig,
        rng: np.random.Generator,
        lattices=None,
        n_virtual_tx: int = 8,
        noise_var: float = 0.0,
        tap_delay: bool = False,
        carrier_phase: bool = False,
    ):
        from .lattice import build_mirror_lattice

        self.env = env
        self.ofdm = ofdm
        self.noise_var = noise_var
        self.tap_delay = tap_delay
        self.carrier_phase = carrier_phase
        if lattices is None:
            lattices = [
                build_mirror_lattice(env, q, n_virtual_tx=n_virtual_tx)
                for q in range(env.n_aps)
            ]
        self.lattices = lattices
        self._offsets = []
        self._phases = []
        for lat in lattices:
            offs = {}
            phas = {}
            for cl in lat.clusters:
                offs[cl.cluster_id] = rng.standard_normal((cl.n_virtual_tx, 2))
                phas[cl.cluster_id] = rng.uniform(0.0, 2.0 * np.pi, cl.n_virtual_tx)
            self._offsets.append(offs)
            self._phases.append(phas)

    def paths(self, position, ap_id: int) -> PathSet:
        lat = self.lattices[ap_id]
        out = []
        for cl in lat.clusters:
            out.extend(
                _cluster_subpaths(
                    self.env,
                    lat,
                    cl,
                    position,
                    self._offsets[ap_id][cl.cluster_id],
                    self._phases[ap_id][cl.cluster_id],
                    self.carrier_phase,
                )
            )
        return PathSet(paths=tuple(out))

    def channel(self, position, ap_id: int, time_index: int = 0, rng=None):
        geom = self.env.ap_geometry(ap_id)
        paths = self.paths(position, ap_id)
        front = [
            p for p in paths if -np.pi / 2 < wrap_pi(p.aod_rad - geom.reference_angle) < np.pi / 2
        ]
        if not front:
            raise CoverageGapError(
                f"no visible propagation path from AP {ap_id} to {np.asarray(position)}"
            )
        tensor = assemble_channel(
            PathSet(tuple(front)), geom, self.ofdm, ap_id=ap_id,
            time_index=time_index, tap_delay=self.tap_delay,
        )
        if self.noise_var > 0.0:
            if rng is None:
                raise ValueError("rng required when noise_var > 0")
            scale = np.sqrt(self.noise_var / 2.0)
            noise = scale * (
                rng.standard_normal(tensor.shape) + 1j * rng.standard_normal(tensor.shape)
            )
            tensor = ChannelTensor(tensor.entries + noise, ap_id=ap_id, time_index=time_index)
        return tensor, PathSet(tuple(front))


def synth_channel(
    position,
    ap_id: int,
    env: EnvironmentModel,
    lattice: MirrorLattice,
    ofdm: OfdmConfig,
    rng: np.random.Generator,
    noise_var: float = 0.0,
    tap_delay: bool = False,
    carrier_phase: bool = False,
):
    """One-shot synthesis: draw the scattering ensemble fresh and assemble H.

    For trajectory-coherent generation use ChannelSampler, which keeps the
    ensemble fixed across calls.
    """
    env_geom = env.ap_geometry(ap_id)
    paths = []
    for cl in lattice.clusters:
        offsets = rng.standard_normal((cl.n_virtual_tx, 2))
        phases = rng.uniform(0.0, 2.0 * np.pi, cl.n_virtual_tx)
        paths.extend(
            _cluster_subpaths(env, lattice, cl, position, offsets, phases, carrier_phase)
        )
    front = [
        p for p in paths if -np.pi / 2 < wrap_pi(p.aod_rad - env_geom.reference_angle) < np.pi / 2
    ]
    if not front:
        raise CoverageGapError(
            f"no visible propagation path from AP {ap_id} to {np.asarray(position)}"
        )
    pset = PathSet(tuple(front))
    tensor = assemble_channel(pset, env_geom, ofdm, ap_id=ap_id, tap_delay=tap_delay)
    if noise_var > 0.0:
        scale = np.sqrt(noise_var / 2.0)
        noise = scale * (
            rng.standard_normal(tensor.shape) + 1j * rng.standard_normal(tensor.shape)
        )
        tensor = ChannelTensor(tensor.entries + noise, ap_id=ap_id)
    return tensor, pset
