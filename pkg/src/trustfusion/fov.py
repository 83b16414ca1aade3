"""Online field-of-view estimation from planar point clouds.

A sensor's visible region is estimated by binning scan returns in azimuth
about the sensor origin and taking the furthest return per bin as the
visibility boundary. Empty bins extend to max_range: in the synthetic
sensor, no return means nothing obstructs the ray within range (this
deliberately differs from physical LiDAR semantics, where no return is
ambiguous).
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .geometry import Point2, Pose2, StarPolygon, contains_many, to_global

__all__ = ["FovPolygon", "estimate_fov", "expected_visible", "radially_inside"]

DEFAULT_N_BINS = 72  # 5 degree bins


class FovPolygon(StarPolygon):
    """A star-shaped visibility polygon around a sensor origin.

    Carries the frame timestamp so aggregator-side consumers can check
    time alignment. Vertex ranges never exceed the sensor max_range.
    """

    def __init__(self, origin: Point2, vertices, timestamp: float = 0.0,
                 max_range: float = float("inf"), validate: bool = True):
        super().__init__(origin, vertices, validate=validate)
        self.timestamp = float(timestamp)
        self.max_range = float(max_range)

    def transform(self, pose: Pose2) -> "FovPolygon":
        """Rigidly map the polygon (origin and vertices) by a pose."""
        origin = to_global(pose, self.origin)
        rot = pose.rotation()
        verts = self.vertices @ rot.T + [pose.x, pose.y]
        return FovPolygon(origin, verts, timestamp=self.timestamp,
                          max_range=self.max_range, validate=False)

    def vertex_list(self) -> list:
        """Ordered vertex list for the per-frame agent message record."""
        return [[float(x), float(y)] for x, y in self.vertices]


def estimate_fov(cloud: np.ndarray, max_range: float, n_bins: int = DEFAULT_N_BINS,
                 timestamp: float = 0.0) -> FovPolygon:
    """Estimate the visible region from a planar point cloud by ray tracing.

    The cloud is expressed in the sensor frame (sensor at the origin).
    Azimuth [0, 2pi) is partitioned into n_bins; each bin's boundary range
    is the maximum range among its points (capped at max_range), and bins
    with no points take max_range. Vertices sit at bin-center azimuths,
    ordered counter-clockwise.

    Args:
        cloud: (N, 2) array of points, or empty.
        max_range: sensor range cap, > 0.
        n_bins: azimuth resolution, >= 8.

    Returns:
        FovPolygon about the sensor origin.
    """
    if n_bins < 8:
        raise ValueError("n_bins must be >= 8")
    if max_range <= 0.0:
        raise ValueError("max_range must be > 0")
    pts = np.asarray(cloud, dtype=float).reshape(-1, 2)
    bounds = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=int)
    if len(pts):
        r = np.hypot(pts[:, 0], pts[:, 1])
        az = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)
        idx = np.minimum((az / (2.0 * math.pi) * n_bins).astype(int), n_bins - 1)
        np.maximum.at(bounds, idx, r)
        np.add.at(counts, idx, 1)
    bounds = np.where(counts > 0, np.minimum(bounds, max_range), max_range)
    centers = (np.arange(n_bins) + 0.5) * (2.0 * math.pi / n_bins)
    verts = np.stack([bounds * np.cos(centers), bounds * np.sin(centers)], axis=1)
    return FovPolygon(Point2(0.0, 0.0), verts, timestamp=timestamp,
                      max_range=max_range, validate=False)


def radially_inside(fov: FovPolygon, position, margin: float = 0.0) -> bool:
    """Radial FOV membership with a signed boundary margin in meters.

    The estimated boundary sits on detected surfaces, so consumers that
    reason about object *centers* use a positive margin; consumers that
    must be sure a point is genuinely visible use a negative one.
    """
    dx = float(position[0]) - fov.origin.x
    dy = float(position[1]) - fov.origin.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        return True
    return r <= fov.radial_bound(math.atan2(dy, dx)) + margin


def expected_visible(fov: FovPolygon, tracks_global: Iterable) -> set:
    """Ids of tracks whose position falls inside the visibility polygon.

    The polygon and the tracks must share a global frame. Containment is
    boundary-inclusive, matching the polygon containment rule.
    """
    tracks = list(tracks_global)
    if not tracks:
        return set()
    pts = np.array([[tr.position[0], tr.position[1]] for tr in tracks])
    inside = contains_many(fov, pts)
    return {tr.id for tr, ok in zip(tracks, inside) if ok}
