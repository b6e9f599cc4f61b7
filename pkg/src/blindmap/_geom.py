"""Small 2D geometry kernel: reflections, segment intersections, polygons, angles."""

from __future__ import annotations

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s

_EPS = 1e-12


def wrap_pi(angle):
    """Wrap angle(s) to (-pi, pi]."""
    a = np.asarray(angle, dtype=float)
    out = -((-a + np.pi) % (2.0 * np.pi) - np.pi)
    if np.ndim(angle) == 0:
        return float(out)
    return out


def wrap_2pi(angle):
    """Wrap angle(s) to [0, 2*pi)."""
    a = np.asarray(angle, dtype=float)
    out = np.mod(a, 2.0 * np.pi)
    if np.ndim(angle) == 0:
        return float(out)
    return out


def azimuth(src, dst):
    """Azimuth of the direction src -> dst, in [0, 2*pi)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    d = dst - src
    if np.ndim(d) == 1:
        return wrap_2pi(np.arctan2(d[1], d[0]))
    return wrap_2pi(np.arctan2(d[..., 1], d[..., 0]))


def reflect_point(p, a, b):
    """Reflect point p about the infinite line through a and b."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = b - a
    nn = float(u @ u)
    if nn <= _EPS:
        raise ValueError("degenerate line: a == b")
    t = float((p - a) @ u) / nn
    foot = a + t * u
    return 2.0 * foot - p


def segment_intersection(p0, p1, a, b):
    """Intersection of segments [p0,p1] and [a,b].

    Returns (s, t, point) with s the parameter along [p0,p1] and t along
    [a,b], both in [0,1], or None if the segments do not cross (parallel
    or disjoint).
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = p1 - p0
    q = b - a
    denom = r[0] * q[1] - r[1] * q[0]
    if abs(denom) <= _EPS:
        return None
    d = a - p0
    s = (d[0] * q[1] - d[1] * q[0]) / denom
    t = (d[0] * r[1] - d[1] * r[0]) / denom
    if -_EPS <= s <= 1.0 + _EPS and -_EPS <= t <= 1.0 + _EPS:
        return float(s), float(t), p0 + s * r
    return None


def segment_blocked(p0, p1, surfaces, skip=(), end_tol=1e-9):
    """True if the open segment (p0,p1) crosses any surface.

    ``surfaces`` is an iterable of objects with .a and .b endpoints.
    Indices in ``skip`` are ignored.  Crossings within ``end_tol`` (as a
    segment-parameter fraction of the hit surface position relative to the
    segment ends) are treated as touching at an endpoint, not blocking, so
    that bounce points sitting exactly on their generating walls do not
    self-occlude.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    seg_len = float(np.linalg.norm(p1 - p0))
    if seg_len <= end_tol:
        return False
    tol = max(end_tol / seg_len, 1e-9)
    for idx, srf in enumerate(surfaces):
        if idx in skip:
            continue
        hit = segment_intersection(p0, p1, srf.a, srf.b)
        if hit is None:
            continue
        s, _, _ = hit
        if tol < s < 1.0 - tol:
            return True
    return False


def point_in_polygon(points, polygon, edge_tol=1e-9):
    """Vectorized point-in-polygon test (crossing number), boundary inclusive.

    points: (N,2) or (2,); polygon: (V,2) closed implicitly.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polygon, dtype=float)
    n = poly.shape[0]
    x = pts[:, 0]
    y = pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        # boundary proximity
        ex, ey = x1 - x0, y1 - y0
        ll = ex * ex + ey * ey
        if ll > 0:
            t = np.clip(((x - x0) * ex + (y - y0) * ey) / ll, 0.0, 1.0)
            dx = x - (x0 + t * ex)
            dy = y - (y0 + t * ey)
            on_edge |= dx * dx + dy * dy <= edge_tol * edge_tol
        # ray crossing (ray to +x)
        cond = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x0 + (y - y0) * (x1 - x0) / np.where(y1 == y0, np.inf, y1 - y0)
        inside ^= cond & (x < xi)
    result = inside | on_edge
    if np.ndim(points) == 1:
        return bool(result[0])
    return result


def polygon_grid(polygon, resolution, edge_tol=1e-9):
    """Uniform grid of points with the given spacing, clipped to the polygon."""
    poly = np.asarray(polygon, dtype=float)
    xmin, ymin = poly.min(axis=0)
    xmax, ymax = poly.max(axis=0)
    nx = int(round((xmax - xmin) / resolution)) + 1
    ny = int(round((ymax - ymin) / resolution)) + 1
    xs = xmin + resolution * np.arange(nx)
    ys = ymin + resolution * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    keep = point_in_polygon(pts, poly, edge_tol=edge_tol)
    return pts[keep]
