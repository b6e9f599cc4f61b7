"""Image lattice of an AP: repeated specular reflections plus diffraction arcs.

Each wall reflection of an AP produces a mirror image; chains of
reflections build a lattice of virtual transmitters.  A diffracting edge
adds an arc of virtual transmitters at the parent's range from the edge.
Chains may reflect repeatedly, but a diffraction element is terminal: the
arc geometry depends on the receiver, so chaining past it has no single
image point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .._geom import azimuth, reflect_point, segment_blocked, segment_intersection, wrap_pi
from .types import EnvironmentModel

log = logging.getLogger(__name__)

DEFAULT_VIRTUAL_TX = 8


@dataclass(frozen=True)
class ImageCluster:
    """One node of the lattice: an image point plus its scattering spread.

    chain is a tuple of ("surface", idx) / ("scatterer", idx) elements in
    the order the wave hits them, empty for the physical AP itself.
    """

    cluster_id: int
    center: np.ndarray
    kind: str  # "mirror" | "diffraction-arc"
    chain: tuple
    n_virtual_tx: int
    angular_spread: float
    absorption_factor: float  # product of (1 - absorption) along the chain

    @property
    def is_source(self) -> bool:
        return len(self.chain) == 0

    @property
    def order(self) -> int:
        return len(self.chain)


@dataclass(frozen=True)
class MirrorLattice:
    ap_id: int
    clusters: tuple

    def __len__(self):
        return len(self.clusters)

    def cluster(self, cluster_id: int) -> ImageCluster:
        return self.clusters[cluster_id]


def build_mirror_lattice(
    env: EnvironmentModel,
    ap_id: int,
    n_virtual_tx: int = DEFAULT_VIRTUAL_TX,
) -> MirrorLattice:
    """Breadth-first image construction up to env.max_reflection_order.

    Deterministic: cluster order is BFS order, surfaces before scatterers
    at each depth.  Consecutive reflections about the same wall are skipped
    (they undo each other).
    """
    ap_pos = env.ap_position(ap_id)
    clusters = [
        ImageCluster(
            cluster_id=0,
            center=ap_pos.copy(),
            kind="mirror",
            chain=(),
            n_virtual_tx=1,
            angular_spread=0.0,
            absorption_factor=1.0,
        )
    ]
    frontier = [clusters[0]]
    for _ in range(env.max_reflection_order):
        new_frontier = []
        for parent in frontier:
            if parent.kind == "diffraction-arc":
                continue  # arcs are terminal
            last = parent.chain[-1] if parent.chain else None
            for si, srf in enumerate(env.surfaces):
                if last == ("surface", si):
                    continue
                center = reflect_point(parent.center, srf.a, srf.b)
                child = ImageCluster(
                    cluster_id=len(clusters),
                    center=center,
                    kind="mirror",
                    chain=parent.chain + (("surface", si),),
                    n_virtual_tx=n_virtual_tx,
                    angular_spread=srf.scatter_spread,
                    absorption_factor=parent.absorption_factor * (1.0 - srf.absorption),
                )
                clusters.append(child)
                new_frontier.append(child)
            for ci, sc in enumerate(env.scatterers):
                radius = float(np.linalg.norm(parent.center - sc.position))
                if radius <= 0:
                    continue
                # zero-bend point of the arc: straight through the edge
                u = (sc.position - parent.center) / radius
                center = sc.position + radius * u
                child = ImageCluster(
                    cluster_id=len(clusters),
                    center=center,
                    kind="diffraction-arc",
                    chain=parent.chain + (("scatterer", ci),),
                    n_virtual_tx=1,
                    angular_spread=sc.max_bend,
                    absorption_factor=parent.absorption_factor,
                )
                clusters.append(child)
                new_frontier.append(child)
        frontier = new_frontier
    _warn_on_overlaps(clusters)
    return MirrorLattice(ap_id=ap_id, clusters=tuple(clusters))


def _warn_on_overlaps(clusters, factor: float = 2.0):
    # the model assumes distinct chains give distinct, non-overlapping clusters
    centers = np.array([c.center for c in clusters])
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            gap = np.linalg.norm(centers[i] - centers[j])
            scale = factor * max(clusters[i].angular_spread, clusters[j].angular_spread)
            if gap < max(scale, 1e-9):
                log.warning(
                    "image clusters %d and %d nearly overlap (gap %.3g m)", i, j, gap
                )


def _images_along_chain(env, ap_pos, chain):
    imgs = [np.asarray(ap_pos, dtype=float)]
    for kind, idx in chain:
        srf = env.surfaces[idx]
        imgs.append(reflect_point(imgs[-1], srf.a, srf.b))
    return imgs


def _bounce_points_for(env, chain, target, ap_pos=None):
    if ap_pos is None:
        raise ValueError("ap position required")
    imgs = _images_along_chain(env, ap_pos, chain)
    point = np.asarray(target, dtype=float)
    bounces = [None] * len(chain)
    for k in range(len(chain) - 1, -1, -1):
        srf = env.surfaces[chain[k][1]]
        hit = segment_intersection(imgs[k + 1], point, srf.a, srf.b)
        if hit is None:
            return None
        bounces[k] = hit[2]
        point = hit[2]
    return bounces


def _reflection_path(env, ap_pos, chain, target):
    """Full physical polyline AP -> bounces -> target, or None if unfoldable."""
    if not chain:
        return [np.asarray(ap_pos, float), np.asarray(target, float)]
    bounces = _bounce_points_for(env, chain, target, ap_pos=ap_pos)
    if bounces is None:
        return None
    return [np.asarray(ap_pos, float)] + bounces + [np.asarray(target, float)]


def _path_clear(env, points, chain):
    """Check every leg of the polyline against occlusion by other walls."""
    gen = {idx for kind, idx in chain if kind == "surface"}
    for leg in range(len(points) - 1):
        p0, p1 = points[leg], points[leg + 1]
        # legs touch their generating walls only at endpoints; a crossing
        # strictly inside any wall blocks the path
        for si, srf in enumerate(env.surfaces):
            hit = segment_intersection(p0, p1, srf.a, srf.b)
            if hit is None:
                continue
            s = hit[0]
            seg_len = np.linalg.norm(np.asarray(p1) - np.asarray(p0))
            tol = 1e-7 / max(seg_len, 1e-7)
            if tol < s < 1.0 - tol:
                return False
    return True


def trace_cluster(env: EnvironmentModel, lattice: MirrorLattice, cluster_id: int, position):
    """Geometry of one cluster's dominant path to a receiver position.

    Returns None when the path does not exist (wall missed, bend out of
    range, or occlusion); otherwise a dict with:
      virtual_tx  image point whose range to the RX equals the path length
      points      physical polyline from the AP to the RX
      departure   azimuth of the first physical leg at the AP
    """
    cl = lattice.cluster(cluster_id)
    ap_pos = env.ap_position(lattice.ap_id)
    x = np.asarray(position, dtype=float)

    if cl.kind == "mirror":
        path = _reflection_path(env, ap_pos, cl.chain, x)
        if path is None:
            return None
        if any(np.linalg.norm(path[i + 1] - path[i]) < 1e-9 for i in range(len(path) - 1)):
            return None
        if not _path_clear(env, path, cl.chain):
            return None
        imgs = _images_along_chain(env, ap_pos, cl.chain)
        return {
            "virtual_tx": imgs[-1],
            "points": path,
            "departure": azimuth(path[0], path[1]),
        }

    # diffraction arc: pure-reflection prefix to the edge, then one bend
    *prefix, (_, sci) = cl.chain
    sc = env.scatterers[sci]
    prefix = tuple(prefix)
    head = _reflection_path(env, ap_pos, prefix, sc.position)
    if head is None:
        return None
    if not _path_clear(env, head, prefix):
        return None
    incoming = azimuth(head[-2], sc.position)
    outgoing = azimuth(sc.position, x)
    bend = abs(wrap_pi(outgoing - incoming))
    if bend > sc.max_bend:
        return None
    if segment_blocked(sc.position, x, env.surfaces):
        return None
    radius = float(np.linalg.norm(head[-2] - sc.position))
    away = x - sc.position
    dist = float(np.linalg.norm(away))
    if dist < 1e-9:
        return None
    virtual_tx = sc.position - radius * (away / dist)
    points = head + [x]
    return {
        "virtual_tx": virtual_tx,
        "points": points,
        "departure": azimuth(points[0], points[1]),
    }


def visible_images(position, env: EnvironmentModel, lattice: MirrorLattice):
    """IDs of the lattice clusters whose path to ``position`` exists."""
    out = []
    for cl in lattice.clusters:
        if trace_cluster(env, lattice, cl.cluster_id, position) is not None:
            out.append(cl.cluster_id)
    return out
