"""Scene file I/O (JSON)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .types import ArrayGeometry, EnvironmentModel, OfdmConfig, Scatterer, Surface

SCENE_VERSION = "blindmap-scene/1"


def scene_to_dict(env: EnvironmentModel, ofdm: OfdmConfig) -> dict:
    return {
        "version": SCENE_VERSION,
        "region": np.asarray(env.region).tolist(),
        "max_reflection_order": env.max_reflection_order,
        "surfaces": [
            {
                "a": s.a.tolist(),
                "b": s.b.tolist(),
                "absorption": s.absorption,
                "scatter_spread": s.scatter_spread,
            }
            for s in env.surfaces
        ],
        "scatterers": [
            {"position": sc.position.tolist(), "max_bend": sc.max_bend}
            for sc in env.scatterers
        ],
        "aps": [
            {
                "position": pos.tolist(),
                "n_antennas": g.n_antennas,
                "spacing": g.spacing,
                "carrier_hz": g.carrier_hz,
                "reference_angle": g.reference_angle,
            }
            for pos, g in env.aps
        ],
        "ofdm": {"n_subcarriers": ofdm.n_subcarriers, "bandwidth_hz": ofdm.bandwidth_hz},
    }


def scene_from_dict(data: dict):
    if data.get("version") != SCENE_VERSION:
        raise ValueError(f"unsupported scene version: {data.get('version')!r}")
    surfaces = tuple(
        Surface(
            a=np.array(s["a"]),
            b=np.array(s["b"]),
            absorption=s.get("absorption", 0.3),
            scatter_spread=s.get("scatter_spread", 0.02),
        )
        for s in data.get("surfaces", [])
    )
    scatterers = tuple(
        Scatterer(position=np.array(sc["position"]), max_bend=sc.get("max_bend", 0.5))
        for sc in data.get("scatterers", [])
    )
    aps = tuple(
        (
            np.array(ap["position"]),
            ArrayGeometry(
                n_antennas=ap["n_antennas"],
                spacing=ap["spacing"],
                carrier_hz=ap["carrier_hz"],
                reference_angle=ap.get("reference_angle", 0.0),
            ),
        )
        for ap in data["aps"]
    )
    env = EnvironmentModel(
        surfaces=surfaces,
        scatterers=scatterers,
        aps=aps,
        region=np.array(data["region"]),
        max_reflection_order=data.get("max_reflection_order", 1),
    )
    ofdm = OfdmConfig(
        n_subcarriers=data["ofdm"]["n_subcarriers"],
        bandwidth_hz=data["ofdm"]["bandwidth_hz"],
    )
    return env, ofdm


def save_scene(path, env: EnvironmentModel, ofdm: OfdmConfig) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(env, ofdm), indent=2))


def load_scene(path):
    return scene_from_dict(json.loads(Path(path).read_text()))
