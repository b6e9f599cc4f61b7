"""Domain types for the indoor radio environment simulator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._geom import SPEED_OF_LIGHT, point_in_polygon


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array at an access point.

    reference_angle is the boresight azimuth of the array in the global
    frame; relative departure angles are measured against it and confined
    to the open front hemisphere (-pi/2, pi/2).
    """

    n_antennas: int
    spacing: float
    carrier_hz: float
    reference_angle: float = 0.0

    def __post_init__(self):
        if self.n_antennas < 2:
            raise ValueError("n_antennas must be >= 2")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if not (0.0 <= self.reference_angle < 2.0 * np.pi):
            object.__setattr__(
                self, "reference_angle", float(np.mod(self.reference_angle, 2.0 * np.pi))
            )

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class OfdmConfig:
    n_subcarriers: int
    bandwidth_hz: float

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.n_subcarriers <= 0:
            raise ValueError("n_subcarriers must be positive")

    def validate_against(self, geom: ArrayGeometry) -> None:
        # the observation model needs more subcarriers than antennas
        if self.n_subcarriers <= geom.n_antennas:
            raise ValueError("n_subcarriers must exceed n_antennas")


@dataclass(frozen=True)
class Surface:
    """Reflecting wall segment: mostly specular with a small angular spread."""

    a: np.ndarray
    b: np.ndarray
    absorption: float = 0.3
    scatter_spread: float = 0.02  # rad, spread of scattered energy around the specular ray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if np.linalg.norm(self.b - self.a) <= 0:
            raise ValueError("degenerate surface (zero length)")
        if not (0.0 < self.absorption < 1.0):
            raise ValueError("absorption must be in (0, 1)")
        if self.scatter_spread < 0:
            raise ValueError("scatter_spread must be >= 0")


@dataclass(frozen=True)
class Scatterer:
    """Point obstacle edge that bends rays up to max_bend radians."""

    position: np.ndarray
    max_bend: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.max_bend < 0:
            raise ValueError("max_bend must be >= 0")


@dataclass(frozen=True)
class EnvironmentModel:
    """Static 2D scene: walls, diffracting edges, AP deployment, region hull."""

    surfaces: tuple
    scatterers: tuple
    aps: tuple  # of (position ndarray, ArrayGeometry)
    region: np.ndarray  # polygon vertices (V, 2)
    max_reflection_order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        aps = tuple((np.asarray(p, dtype=float), g) for p, g in self.aps)
        object.__setattr__(self, "aps", aps)
        object.__setattr__(self, "region", np.asarray(self.region, dtype=float))
        if self.max_reflection_order < 0:
            raise ValueError("max_reflection_order must be >= 0")
        for pos, _ in aps:
            if not point_in_polygon(pos, self.region, edge_tol=1e-6):
                raise ValueError(f"AP at {pos} lies outside the region hull")

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    def ap_position(self, ap_id: int) -> np.ndarray:
        return self.aps[ap_id][0]

    def ap_geometry(self, ap_id: int) -> ArrayGeometry:
        return self.aps[ap_id][1]


@dataclass(frozen=True)
class MobilityParams:
    """Velocity-correlated random-walk parameters."""

    gamma: float
    slot_s: float
    mean_velocity: np.ndarray
    sigma_v: float

    def __post_init__(self):
        object.__setattr__(self, "mean_velocity", np.asarray(self.mean_velocity, dtype=float))
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")
        if self.slot_s <= 0:
            raise ValueError("slot_s must be positive")
        if self.sigma_v < 0:
            raise ValueError("sigma_v must be >= 0")


def rectangle_room(
    width: float,
    height: float,
    aps: list,
    absorption: float = 0.3,
    scatter_spread: float = 0.02,
    scatterers=(),
    max_reflection_order: int = 1,
    origin=(0.0, 0.0),
) -> EnvironmentModel:
    """Axis-aligned rectangular room with four walls.

    ``aps`` is a list of (position, ArrayGeometry) pairs.
    """
    ox, oy = origin
    c = [
        np.array([ox, oy]),
        np.array([ox + width, oy]),
        np.array([ox + width, oy + height]),
        np.array([ox, oy + height]),
    ]
    walls = tuple(
        Surface(c[i], c[(i + 1) % 4], absorption=absorption, scatter_spread=scatter_spread)
        for i in range(4)
    )
    region = np.array([c[0], c[1], c[2], c[3]])
    return EnvironmentModel(
        surfaces=walls,
        scatterers=tuple(scatterers),
        aps=tuple(aps),
        region=region,
        max_reflection_order=max_reflection_order,
    )
