"""Measurement dataset container and its binary file format.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header, then
one fixed-size float64 record per (t, q) pair in t-major order:

    channel re/im interleaved (n_t * m * 2), position (2), los flag (1),
    dominant departure azimuth (1).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATASET_VERSION = "blindmap-ds/1"


@dataclass
class MeasurementDataset:
    channels: np.ndarray  # (T, Q, N_t, M) complex128
    positions: np.ndarray  # (T, 2) ground-truth
    los: np.ndarray  # (T, Q) bool
    dominant_aod: np.ndarray  # (T, Q) rad
    ap_positions: np.ndarray  # (Q, 2)
    reference_angles: np.ndarray  # (Q,)
    spacing: float
    carrier_hz: float
    bandwidth_hz: float
    slot_s: float
    region: np.ndarray  # polygon (V, 2)

    @property
    def n_steps(self) -> int:
        return self.channels.shape[0]

    @property
    def n_aps(self) -> int:
        return self.channels.shape[1]

    @property
    def n_antennas(self) -> int:
        return self.channels.shape[2]

    @property
    def n_subcarriers(self) -> int:
        return self.channels.shape[3]

    def header(self) -> dict:
        t, q, n_t, m = self.channels.shape
        return {
            "version": DATASET_VERSION,
            "t": t,
            "q": q,
            "n_t": n_t,
            "m": m,
            "ap_positions": self.ap_positions.tolist(),
            "reference_angles": self.reference_angles.tolist(),
            "spacing": self.spacing,
            "carrier_hz": self.carrier_hz,
            "bandwidth_hz": self.bandwidth_hz,
            "slot_s": self.slot_s,
            "region": self.region.tolist(),
            "record_layout": "channel re/im interleaved, pos(2), los(1), dominant_aod(1)",
            "count": t * q,
        }


def save_dataset(path, ds: MeasurementDataset) -> None:
    t, q, n_t, m = ds.channels.shape
    header = json.dumps(ds.header(), sort_keys=True).encode("utf-8")
    rec_floats = n_t * m * 2 + 4
    body = np.empty((t, q, rec_floats), dtype="<f8")
    ch = ds.channels.reshape(t, q, n_t * m)
    body[:, :, 0 : 2 * n_t * m : 2] = ch.real
    body[:, :, 1 : 2 * n_t * m : 2] = ch.imag
    body[:, :, -4:-2] = ds.positions[:, None, :]
    body[:, :, -2] = ds.los.astype(float)
    body[:, :, -1] = ds.dominant_aod
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        f.write(body.tobytes())


def load_dataset(path) -> MeasurementDataset:
    raw = Path(path).read_bytes()
    (hlen,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    if header.get("version") != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version: {header.get('version')!r}")
    t, q, n_t, m = header["t"], header["q"], header["n_t"], header["m"]
    rec_floats = n_t * m * 2 + 4
    body = np.frombuffer(raw[8 + hlen :], dtype="<f8").reshape(t, q, rec_floats)
    ch = body[:, :, 0 : 2 * n_t * m : 2] + 1j * body[:, :, 1 : 2 * n_t * m : 2]
    return MeasurementDataset(
        channels=ch.reshape(t, q, n_t, m).astype(complex),
        positions=body[:, 0, -4:-2].copy(),
        los=body[:, :, -2] > 0.5,
        dominant_aod=body[:, :, -1].copy(),
        ap_positions=np.array(header["ap_positions"], dtype=float),
        reference_angles=np.array(header["reference_angles"], dtype=float),
        spacing=header["spacing"],
        carrier_hz=header["carrier_hz"],
        bandwidth_hz=header["bandwidth_hz"],
        slot_s=header["slot_s"],
        region=np.array(header["region"], dtype=float),
    )


def generate_dataset(
    env,
    ofdm,
    trajectory: np.ndarray,
    rng: np.random.Generator,
    slot_s: float,
    noise_var: float = 0.0,
    n_virtual_tx: int = 8,
    carrier_phase: bool = False,
    sampler=None,
) -> MeasurementDataset:
    """Synthesize channel measurements along a trajectory.

    The scattering ensemble is frozen once (see ChannelSampler) so that
    channels vary smoothly along the path.  LOS flags and the dominant
    departure azimuth are recorded from the strongest path per (t, q).
    """
    from .channel import ChannelSampler

    if sampler is None:
        sampler = ChannelSampler(
            env,
            ofdm,
            rng,
            n_virtual_tx=n_virtual_tx,
            noise_var=noise_var,
            carrier_phase=carrier_phase,
        )
    t_len = trajectory.shape[0]
    q_len = env.n_aps
    n_t = env.ap_geometry(0).n_antennas
    channels = np.zeros((t_len, q_len, n_t, ofdm.n_subcarriers), dtype=complex)
    los = np.zeros((t_len, q_len), dtype=bool)
    dom_aod = np.zeros((t_len, q_len), dtype=float)
    for t in range(t_len):
        for q in range(q_len):
            tensor, paths = sampler.channel(trajectory[t], q, time_index=t, rng=rng)
            channels[t, q] = tensor.entries
            los[t, q] = any(p.is_los for p in paths)
            strongest = max(paths, key=lambda p: abs(p.gain))
            dom_aod[t, q] = strongest.aod_rad
    geom0 = env.ap_geometry(0)
    return MeasurementDataset(
        channels=channels,
        positions=np.asarray(trajectory, dtype=float),
        los=los,
        dominant_aod=dom_aod,
        ap_positions=np.array([env.ap_position(q) for q in range(q_len)]),
        reference_angles=np.array([env.ap_geometry(q).reference_angle for q in range(q_len)]),
        spacing=geom0.spacing,
        carrier_hz=geom0.carrier_hz,
        bandwidth_hz=ofdm.bandwidth_hz,
        slot_s=slot_s,
        region=np.asarray(env.region, dtype=float),
    )
