"""Agent-local multi-target tracking and aggregator-side fusion.

Both stages share the same machinery: constant-velocity Kalman filtering,
gated optimal assignment (JVC via scipy's linear_sum_assignment), and
M-of-N lifecycle management. The aggregator additionally supports per-agent
gain weights so distrusted contributors can be discounted, and a flag bit
that keeps suspect tracks internally while excluding them from the
published operating picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .fov import FovPolygon, radially_inside
from .geometry import Point2, Pose2, to_global, to_local

__all__ = [
    "TrackerConfig",
    "Track",
    "AgentReport",
    "AggTrack",
    "LocalTracker",
    "Aggregator",
    "gated_assignment",
    "cv_matrices",
]

ASSOC_GATE = 2.0          # m, assignment gate used across the pipeline
FOV_MATCH_MARGIN = 2.0    # m beyond the FOV boundary: matched tracks still count as seen
FOV_EXPECT_MARGIN = -0.5  # m inside the boundary: required to call a track "expected"

_H = np.array([[1.0, 0.0, 0.0, 0.0],
               [0.0, 1.0, 0.0, 0.0]])
_I4 = np.eye(4)


@dataclass(frozen=True)
class TrackerConfig:
    """Lifecycle and motion-model knobs shared by both tracking stages."""

    gate: float = ASSOC_GATE
    confirm_hits: int = 3
    delete_misses: int = 5
    process_noise: float = 1.0       # continuous white-acceleration intensity, m^2/s^3
    init_velocity_var: float = 25.0  # (m/s)^2 prior on unobserved velocity
    # Aggregator-side staleness bound: frames a track may coast with no
    # contributor at all (even unexpected ones) before deletion. Prevents
    # runaway ghosts coasting inside occlusion shadows forever. Matches the
    # local delete_misses horizon so aggregate ghosts die with their feeders.
    max_coast_frames: int = 5

    def __post_init__(self):
        if self.gate <= 0 or self.confirm_hits < 1 or self.delete_misses < 1:
            raise ValueError("invalid tracker config")


def cv_matrices(dt: float, q: float):
    """Constant-velocity transition and process noise for [x, y, vx, vy]."""
    F = np.array([[1.0, 0.0, dt, 0.0],
                  [0.0, 1.0, 0.0, dt],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
    dt2, dt3 = dt * dt, dt * dt * dt
    Q = q * np.array([[dt3 / 3.0, 0.0, dt2 / 2.0, 0.0],
                      [0.0, dt3 / 3.0, 0.0, dt2 / 2.0],
                      [dt2 / 2.0, 0.0, dt, 0.0],
                      [0.0, dt2 / 2.0, 0.0, dt]])
    return F, Q


def _kf_update(x: np.ndarray, P: np.ndarray, z: np.ndarray, R: np.ndarray,
               weight: float = 1.0):
    """Position-measurement Kalman update with a scaled gain."""
    xs, Ps = _kf_update_batch(x[None, :], P[None, :, :], z[None, :],
                              R[None, :, :], weight)
    return xs[0], Ps[0]


def _kf_update_batch(x: np.ndarray, P: np.ndarray, z: np.ndarray,
                     R: np.ndarray, weight: float = 1.0):
    """Vectorized position-measurement Kalman updates.

    Shapes: x (n, 4), P (n, 4, 4), z (n, 2), R (n, 2, 2). The gain is
    multiplied by `weight` (trust-informed fusion); the Joseph form keeps
    covariances symmetric positive definite for any weight. Innovation
    covariances are 2x2, so their inverses are closed-form.
    """
    y = z - x[:, :2]
    S = P[:, :2, :2] + R
    det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
    S_inv = np.empty_like(S)
    S_inv[:, 0, 0] = S[:, 1, 1]
    S_inv[:, 0, 1] = -S[:, 0, 1]
    S_inv[:, 1, 0] = -S[:, 1, 0]
    S_inv[:, 1, 1] = S[:, 0, 0]
    S_inv /= det[:, None, None]
    K = P[:, :, :2] @ S_inv
    if weight != 1.0:
        K = weight * K
    x_new = x + np.einsum("nij,nj->ni", K, y)
    ikh = np.broadcast_to(_I4, P.shape).copy()
    ikh[:, :, :2] -= K
    P_new = ikh @ P @ ikh.transpose(0, 2, 1) + K @ R @ K.transpose(0, 2, 1)
    return x_new, 0.5 * (P_new + P_new.transpose(0, 2, 1))


def gated_assignment(a_points: np.ndarray, b_points: np.ndarray, gate: float):
    """Optimal bipartite matches between two point sets within a gate.

    Returns (pairs, unmatched_a, unmatched_b) with pairs as (i, j) index
    tuples. Distances are Euclidean; matches at exactly the gate count.
    """
    na, nb = len(a_points), len(b_points)
    if na == 0 or nb == 0:
        return [], list(range(na)), list(range(nb))
    diff = a_points[:, None, :] - b_points[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    cost = np.where(dist <= gate, dist, 1e9)
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if dist[i, j] <= gate]
    matched_a = {i for i, _ in pairs}
    matched_b = {j for _, j in pairs}
    return (pairs,
            [i for i in range(na) if i not in matched_a],
            [j for j in range(nb) if j not in matched_b])


@dataclass
class Track:
    """A kinematic estimate with lifecycle counters.

    State is [x, y, vx, vy]; the frame (agent or global) is contextual.
    """

    id: int
    state: np.ndarray
    covariance: np.ndarray
    hits: int = 1
    misses: int = 0
    confirmed: bool = False
    last_update: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return self.state[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.state[2:]

    def in_frame(self, pose: Pose2, to_local_frame: bool) -> "Track":
        """Re-express the track in another frame via a rigid pose."""
        return transform_tracks([self], pose, to_local_frame)[0]


def transform_tracks(tracks: list, pose: Pose2, to_local_frame: bool) -> list:
    """Rigidly re-express a batch of tracks in another frame.

    One rotation matrix serves the whole batch; covariances rotate as
    blockdiag(R, R) P blockdiag(R, R)^T.
    """
    if not tracks:
        return []
    rot = pose.rotation()
    if to_local_frame:
        rot = rot.T
    R4 = np.zeros((4, 4))
    R4[:2, :2] = rot
    R4[2:, 2:] = rot
    states = np.array([tr.state for tr in tracks])
    covs = np.array([tr.covariance for tr in tracks])
    if to_local_frame:
        shifted = states[:, :2] - [pose.x, pose.y]
        pos = shifted @ rot.T
    else:
        pos = states[:, :2] @ rot.T + [pose.x, pose.y]
    vel = states[:, 2:] @ rot.T
    new_covs = np.einsum("ij,njk,lk->nil", R4, covs, R4)
    out = []
    for k, tr in enumerate(tracks):
        out.append(Track(tr.id, np.concatenate([pos[k], vel[k]]), new_covs[k],
                         tr.hits, tr.misses, tr.confirmed, tr.last_update))
    return out


@dataclass
class AgentReport:
    """Per-frame message from an agent: pose, confirmed tracks, FOV.

    Tracks and the FOV polygon are expressed in the agent frame; the
    aggregator aligns them via the pose. The global-frame views are
    memoized: a report is an immutable frame snapshot consumed several
    times (fusion, trust, metrics) within one frame.
    """

    agent_id: int
    pose: Pose2
    tracks: list
    fov: FovPolygon
    timestamp: float

    def tracks_global(self) -> list:
        cached = getattr(self, "_tracks_global", None)
        if cached is None:
            cached = transform_tracks(self.tracks, self.pose, to_local_frame=False)
            object.__setattr__(self, "_tracks_global", cached)
        return cached

    def fov_global(self) -> FovPolygon:
        cached = getattr(self, "_fov_global", None)
        if cached is None:
            cached = self.fov.transform(self.pose)
            object.__setattr__(self, "_fov_global", cached)
        return cached


@dataclass
class AggTrack(Track):
    """Aggregator track: global-frame Track plus trust bookkeeping."""

    flagged: bool = False
    trust_alpha: float = 1.0
    trust_beta: float = 1.0


class LocalTracker:
    """Agent-local MTT: predict, gate, assign, update, manage lifecycle.

    Tracks are filtered in the global frame (agent poses are ground truth);
    reports convert to the agent frame.
    """

    def __init__(self, agent_id: int, dt: float, noise_sigma: float,
                 cfg: TrackerConfig = TrackerConfig()):
        self.agent_id = agent_id
        self.dt = dt
        self.cfg = cfg
        self.R = max(noise_sigma, 1e-3) ** 2 * np.eye(2)
        self.tracks: list = []
        self._next_id = 0
        self._F, self._Q = cv_matrices(dt, cfg.process_noise)

    def step(self, detections: list, pose: Pose2, t: float,
             rng: Optional[np.random.Generator] = None) -> None:
        """Advance one frame. `rng` is accepted for interface parity; the
        tracker itself is deterministic."""
        for tr in self.tracks:
            tr.state = self._F @ tr.state
            tr.covariance = self._F @ tr.covariance @ self._F.T + self._Q

        if detections:
            z = np.array([[to_global(pose, d.position).x,
                           to_global(pose, d.position).y] for d in detections])
        else:
            z = np.zeros((0, 2))
        track_pos = np.array([tr.position for tr in self.tracks]).reshape(-1, 2)
        pairs, unmatched_tracks, unmatched_dets = gated_assignment(
            track_pos, z, self.cfg.gate)

        if pairs:
            idx = [i for i, _ in pairs]
            xs = np.array([self.tracks[i].state for i in idx])
            Ps = np.array([self.tracks[i].covariance for i in idx])
            zs = np.array([z[j] for _, j in pairs])
            Rs = np.broadcast_to(self.R, (len(pairs), 2, 2))
            xs, Ps = _kf_update_batch(xs, Ps, zs, Rs)
            for k, i in enumerate(idx):
                tr = self.tracks[i]
                tr.state, tr.covariance = xs[k], Ps[k]
                tr.hits += 1
                tr.misses = 0
                tr.last_update = t
                if tr.hits >= self.cfg.confirm_hits:
                    tr.confirmed = True
        for i in unmatched_tracks:
            self.tracks[i].misses += 1

        self.tracks = [tr for tr in self.tracks
                       if tr.misses < self.cfg.delete_misses]

        for j in unmatched_dets:
            P0 = np.diag([self.R[0, 0], self.R[1, 1],
                          self.cfg.init_velocity_var, self.cfg.init_velocity_var])
            self.tracks.append(Track(
                id=self._next_id,
                state=np.array([z[j, 0], z[j, 1], 0.0, 0.0]),
                covariance=P0,
                hits=1,
                confirmed=self.cfg.confirm_hits <= 1,
                last_update=t,
            ))
            self._next_id += 1

    def confirmed_tracks(self) -> list:
        return [tr for tr in self.tracks if tr.confirmed]

    def report(self, pose: Pose2, fov: FovPolygon, t: float) -> AgentReport:
        """Confirmed tracks re-expressed in the agent frame, plus FOV."""
        local = transform_tracks(self.confirmed_tracks(), pose, to_local_frame=True)
        return AgentReport(self.agent_id, pose, local, fov, t)


class Aggregator:
    """Central fusion node maintaining the global operating picture.

    Per frame: align reports to the global frame, associate per agent in
    ascending id (deterministic sequential fusion), apply trust-weighted
    Kalman updates, seed new tracks from unmatched reports, and age tracks
    missed by every agent expected to see them.
    """

    def __init__(self, dt: float, cfg: TrackerConfig = TrackerConfig()):
        self.dt = dt
        self.cfg = cfg
        self.tracks: list = []
        self._next_id = 0
        self._F, self._Q = cv_matrices(dt, cfg.process_noise)

    def aggregate(self, reports: list, weights: Optional[dict] = None,
                  timestamp: Optional[float] = None) -> None:
        """Fuse one frame of agent reports into the aggregate picture.

        Args:
            reports: AgentReports sharing one timestamp.
            weights: optional {agent_id: gain weight}; missing entries and
                None mean unweighted fusion (the no-security baseline).
            timestamp: expected frame time (defaults to the reports').
        """
        if not reports:
            return
        t0 = reports[0].timestamp if timestamp is None else timestamp
        for rep in reports:
            if rep.timestamp != t0:
                raise ValueError(
                    f"report timestamps differ: {rep.timestamp} != {t0}")

        for tr in self.tracks:
            tr.state = self._F @ tr.state
            tr.covariance = self._F @ tr.covariance @ self._F.T + self._Q

        matched_ids = set()
        new_ids = set()
        for rep in sorted(reports, key=lambda r: r.agent_id):
            if not rep.tracks:
                continue
            w = 1.0 if weights is None else float(weights.get(rep.agent_id, 1.0))
            global_tracks = rep.tracks_global()
            gpos = np.array([tr.position for tr in global_tracks]).reshape(-1, 2)
            apos = np.array([tr.position for tr in self.tracks]).reshape(-1, 2)
            pairs, _, unmatched = gated_assignment(apos, gpos, self.cfg.gate)
            if pairs:
                idx = [i for i, _ in pairs]
                xs = np.array([self.tracks[i].state for i in idx])
                Ps = np.array([self.tracks[i].covariance for i in idx])
                zs = np.array([global_tracks[j].position for _, j in pairs])
                Rs = np.array([global_tracks[j].covariance[:2, :2]
                               for _, j in pairs]) + 1e-6 * np.eye(2)
                xs, Ps = _kf_update_batch(xs, Ps, zs, Rs, weight=w)
                for k, i in enumerate(idx):
                    agg = self.tracks[i]
                    agg.state, agg.covariance = xs[k], Ps[k]
                    matched_ids.add(agg.id)
            for j in unmatched:
                src = global_tracks[j]
                self.tracks.append(AggTrack(
                    id=self._next_id,
                    state=src.state.copy(),
                    covariance=src.covariance.copy(),
                    hits=1,
                    confirmed=self.cfg.confirm_hits <= 1,
                    last_update=t0,
                ))
                new_ids.add(self._next_id)
                self._next_id += 1

        unseen = [tr for tr in self.tracks
                  if tr.id not in new_ids and tr.id not in matched_ids]
        expected = np.zeros(len(unseen), dtype=bool)
        if unseen:
            pos = np.array([tr.position for tr in unseen])
            for rep in reports:
                f = rep.fov_global()
                rel = pos - [f.origin.x, f.origin.y]
                r = np.hypot(rel[:, 0], rel[:, 1])
                half_bin = math.pi / max(len(f.vertices), 1)
                bound = f.radial_bound_conservative(
                    np.arctan2(rel[:, 1], rel[:, 0]), half_bin)
                expected |= r <= bound + FOV_EXPECT_MARGIN
        for tr, exp in zip(unseen, expected):
            if exp:
                tr.misses += 1
        for tr in self.tracks:
            if tr.id in matched_ids:
                tr.hits += 1
                tr.misses = 0
                tr.last_update = t0
                if tr.hits >= self.cfg.confirm_hits:
                    tr.confirmed = True
        stale = self.cfg.max_coast_frames * self.dt + 1e-9
        self.tracks = [tr for tr in self.tracks
                       if tr.misses < self.cfg.delete_misses
                       and t0 - tr.last_update <= stale]
        self._merge_duplicates()

    def _merge_duplicates(self, max_dv: float = 1.0) -> None:
        """Drop the younger of two tracks sharing position and velocity.

        Within-gate pairs moving alike are the same object; duplicates
        arise when a drifting (e.g. coasting) report track seeds a second
        aggregate track next to the original. Objects merely crossing paths
        differ in velocity and are kept apart.
        """
        if len(self.tracks) < 2:
            return
        order = sorted(self.tracks, key=lambda tr: (-tr.hits, tr.id))
        kept: list = []
        dropped = set()
        for tr in order:
            dup = any(
                np.hypot(*(k.position - tr.position)) <= self.cfg.gate
                and np.hypot(*(k.velocity - tr.velocity)) <= max_dv
                for k in kept)
            if dup:
                dropped.add(tr.id)
            else:
                kept.append(tr)
        if dropped:
            self.tracks = [tr for tr in self.tracks if tr.id not in dropped]

    def apply_flags(self, trust_by_id: dict, t_ignore: float) -> None:
        """Set flag bits from track trust means; flagged tracks stay
        internal but leave the published picture."""
        for tr in self.tracks:
            trust = trust_by_id.get(tr.id)
            if trust is not None:
                tr.trust_alpha, tr.trust_beta = trust.alpha, trust.beta
                tr.flagged = trust.mean < t_ignore

    def published_picture(self) -> list:
        """Confirmed, unflagged tracks: the operating picture consumers see."""
        return [tr for tr in self.tracks if tr.confirmed and not tr.flagged]
