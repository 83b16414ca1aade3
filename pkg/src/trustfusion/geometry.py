"""Planar poses, points, and star-shaped polygons shared by all other modules.

Everything here is a pure value type or a pure function: safe to share
between scenario runs and cheap to construct. Angles are radians, normalized
into (-pi, pi] once at construction. Distances are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Pose2",
    "Point2",
    "StarPolygon",
    "normalize_angle",
    "to_global",
    "to_local",
    "contains",
    "contains_many",
    "sample_in_polygon",
    "segment_circle_intersect",
    "segment_segment_intersect",
]

_EPS = 1e-12


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Point2:
    """A point in the plane. Coordinates must be finite."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point2 coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Pose2:
    """A planar rigid pose: translation (x, y) and heading yaw in (-pi, pi]."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)

    def rotation(self) -> np.ndarray:
        """2x2 rotation matrix mapping local coordinates to global."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])


def to_global(pose: Pose2, p_local: Point2) -> Point2:
    """Map a point from the pose's local frame into the global frame.

    Rigid transform: rotate by yaw, then translate by (x, y).
    """
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return Point2(
        pose.x + c * p_local.x - s * p_local.y,
        pose.y + s * p_local.x + c * p_local.y,
    )


def to_local(pose: Pose2, p_global: Point2) -> Point2:
    """Inverse of :func:`to_global`: express a global point in the pose's frame."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    dx, dy = p_global.x - pose.x, p_global.y - pose.y
    return Point2(c * dx + s * dy, -s * dx + c * dy)


class StarPolygon:
    """A simple polygon star-shaped about an interior origin.

    Vertices are ordered counter-clockwise and every vertex is visible from
    the origin, so the boundary crosses each ray from the origin exactly
    once. This is the shape class used for sensor visibility regions.
    """

    def __init__(self, origin: Point2, vertices, validate: bool = True):
        self.origin = origin
        if isinstance(vertices, np.ndarray) and vertices.dtype == float:
            verts = vertices
        else:
            verts = np.asarray(
                [[v.x, v.y] if isinstance(v, Point2) else [v[0], v[1]]
                 for v in vertices],
                dtype=float,
            )
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise ValueError("vertices must be a sequence of planar points")
        self.vertices = verts
        if validate and not self.is_valid():
            raise ValueError("polygon is not star-shaped CCW about its origin")

    def __len__(self) -> int:
        return len(self.vertices)

    def is_valid(self) -> bool:
        """Check the star-shape invariants.

        Requires >= 3 vertices, strictly positive range from the origin,
        CCW orientation, and vertex azimuths strictly increasing around the
        origin (one wrap) with no angular gap of pi or more. Those
        conditions guarantee a simple polygon whose boundary is a function
        of azimuth, i.e. star-shaped about the origin.
        """
        v = self.vertices
        if len(v) < 3:
            return False
        rel = v - [self.origin.x, self.origin.y]
        ranges = np.hypot(rel[:, 0], rel[:, 1])
        if np.any(ranges <= 0.0):
            return False
        az = np.arctan2(rel[:, 1], rel[:, 0])
        gaps = np.diff(az, append=az[0] + 2.0 * math.pi) % (2.0 * math.pi)
        # Strictly increasing azimuth (mod 2pi) with every gap in (0, pi).
        if np.any(gaps <= 0.0) or np.any(gaps >= math.pi):
            return False
        if abs(gaps.sum() - 2.0 * math.pi) > 1e-6:
            return False
        # CCW shoelace area.
        x, y = v[:, 0], v[:, 1]
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        return area2 > 0.0

    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def radial_bound(self, azimuth) -> np.ndarray:
        """Boundary range of the polygon along rays from the origin.

        `azimuth` may be a scalar or an array; returns matching shape.
        Exact piecewise-linear interpolation of the boundary edge crossing
        each queried ray. The azimuth-sorted vertex table is cached; the
        polygon must not be mutated after the first query.
        """
        az = np.atleast_1d(np.asarray(azimuth, dtype=float))
        cached = getattr(self, "_radial_cache", None)
        if cached is None:
            rel = self.vertices - [self.origin.x, self.origin.y]
            vaz = np.arctan2(rel[:, 1], rel[:, 0])
            order = np.argsort(vaz)
            cached = (vaz[order], rel[order])
            self._radial_cache = cached
        vaz_s, rel_s = cached
        q = np.mod(az - vaz_s[0], 2.0 * math.pi) + vaz_s[0]
        idx = np.searchsorted(vaz_s, q, side="right") - 1
        a = rel_s[idx]
        b = rel_s[(idx + 1) % len(rel_s)]
        # Ray origin->u hits segment a->b at t = cross(a, b-a) / cross(u, b-a).
        u = np.stack([np.cos(az), np.sin(az)], axis=-1)
        e = b - a
        denom = u[:, 0] * e[:, 1] - u[:, 1] * e[:, 0]
        numer = a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = numer / denom
        # Degenerate denominators cannot occur for a valid star polygon
        # (edge angular spans are < pi), but guard against float dust.
        t = np.where(np.isfinite(t), t, np.hypot(a[:, 0], a[:, 1]))
        out = np.maximum(t, 0.0)
        return out if np.ndim(azimuth) else float(out[0])

    def radial_bound_conservative(self, azimuth, half_width: float) -> np.ndarray:
        """Minimum boundary range over azimuth +/- half_width.

        Quantized visibility polygons overestimate range in bins straddling
        an occluder's silhouette edge; taking the minimum over one bin
        width either side makes "is this point well inside the region"
        queries robust to that quantization.
        """
        az = np.atleast_1d(np.asarray(azimuth, dtype=float))
        lo = self.radial_bound(az - half_width)
        mid = self.radial_bound(az)
        hi = self.radial_bound(az + half_width)
        out = np.minimum(np.minimum(lo, mid), hi)
        return out if np.ndim(azimuth) else float(out[0])


def contains(poly: StarPolygon, p: Point2) -> bool:
    """True iff the point is inside the polygon or on its boundary."""
    return bool(contains_many(poly, np.array([[p.x, p.y]]))[0])


def contains_many(poly: StarPolygon, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vectorized boundary-inclusive point-in-polygon test.

    Uses the star-shape radial bound: a point is inside iff its range from
    the origin does not exceed the boundary range at its azimuth (within
    `tol`, so boundary points count as inside).
    """
    pts = np.asarray(points, dtype=float)
    rel = pts - [poly.origin.x, poly.origin.y]
    r = np.hypot(rel[:, 0], rel[:, 1])
    az = np.arctan2(rel[:, 1], rel[:, 0])
    bound = poly.radial_bound(az)
    return r <= bound + tol


def sample_in_polygon(poly: StarPolygon, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n points uniformly inside a polygon by rejection from its bbox.

    Deterministic for a given generator state. Returns an (n, 2) array.
    """
    if n <= 0:
        return np.zeros((0, 2))
    lo = poly.vertices.min(axis=0)
    hi = poly.vertices.max(axis=0)
    out = np.zeros((n, 2))
    got = 0
    while got < n:
        batch = max(4 * (n - got), 16)
        cand = rng.uniform(lo, hi, size=(batch, 2))
        keep = cand[contains_many(poly, cand)]
        take = min(len(keep), n - got)
        out[got:got + take] = keep[:take]
        got += take
    return out


def segment_circle_intersect(a: Point2, b: Point2, center: Point2, radius: float):
    """First intersection of segment a->b with a circle, or None.

    Returns the intersection point closest to `a`. Points where the segment
    starts inside the circle return the exit point; a segment entirely
    inside returns None (no boundary crossing).
    """
    if radius <= 0.0:
        raise ValueError("radius must be > 0")
    d = np.array([b.x - a.x, b.y - a.y])
    f = np.array([a.x - center.x, a.y - center.y])
    aa = float(d @ d)
    if aa < _EPS:
        return None
    bb = 2.0 * float(f @ d)
    cc = float(f @ f) - radius * radius
    disc = bb * bb - 4.0 * aa * cc
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    for t in ((-bb - sq) / (2.0 * aa), (-bb + sq) / (2.0 * aa)):
        if -_EPS <= t <= 1.0 + _EPS:
            t = min(max(t, 0.0), 1.0)
            return Point2(a.x + t * d[0], a.y + t * d[1])
    return None


def segment_segment_intersect(a: Point2, b: Point2, p: Point2, q: Point2):
    """Intersection point of segments a->b and p->q, or None.

    Parallel or collinear overlapping segments return None; the ray casting
    callers treat grazing contact as a miss.
    """
    r = (b.x - a.x, b.y - a.y)
    s = (q.x - p.x, q.y - p.y)
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < _EPS:
        return None
    dx, dy = p.x - a.x, p.y - a.y
    t = (dx * s[1] - dy * s[0]) / denom
    u = (dx * r[1] - dy * r[0]) / denom
    if -_EPS <= t <= 1.0 + _EPS and -_EPS <= u <= 1.0 + _EPS:
        t = min(max(t, 0.0), 1.0)
        return Point2(a.x + t * r[0], a.y + t * r[1])
    return None
