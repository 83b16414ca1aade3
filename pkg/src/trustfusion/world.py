"""Ground-truth scene simulation and synthetic planar sensing.

Objects are disks moving under constant velocity or along scripted waypoint
paths; agents are static posts or waypoint-following platforms carrying an
idealized 360-degree range sensor. Detections are produced per frame from
center-point line-of-sight with configurable natural false-negative,
false-positive, and Gaussian noise rates. Identical configs and seeds give
bit-identical detection streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fov import FovPolygon, estimate_fov
from .geometry import Point2, Pose2, sample_in_polygon, to_local

__all__ = [
    "SensorSpec",
    "ObjectState",
    "AgentSpec",
    "Detection",
    "ScenarioConfig",
    "WaypointPath",
    "World",
    "step_world",
    "scan",
    "generate_detections",
    "visible_truths",
]

_LOS_TOL = 1e-9

DEFAULT_NOISE_SIGMA = 0.3      # m per axis; placeholder natural error levels
DEFAULT_P_NATURAL_FN = 0.05    # exercised by the local filter, not measured values
DEFAULT_LAMBDA_NATURAL_FP = 0.05


@dataclass(frozen=True)
class SensorSpec:
    """Synthetic planar range sensor parameters."""

    max_range: float = 50.0
    n_rays: int = 180
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    p_natural_fn: float = DEFAULT_P_NATURAL_FN
    lambda_natural_fp: float = DEFAULT_LAMBDA_NATURAL_FP

    def __post_init__(self):
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")
        if self.n_rays < 8:
            raise ValueError("n_rays must be >= 8")
        if not 0.0 <= self.p_natural_fn <= 1.0:
            raise ValueError("p_natural_fn must be in [0, 1]")
        if self.noise_sigma < 0 or self.lambda_natural_fp < 0:
            raise ValueError("noise_sigma and lambda_natural_fp must be >= 0")


@dataclass
class ObjectState:
    """A true object: disk footprint with kinematic state."""

    id: int
    position: Point2
    velocity: tuple = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"object {self.id}: radius must be > 0")


class WaypointPath:
    """Arc-length parameterized polyline follower.

    Position and heading are functions of distance traveled; at a segment
    end the heading snaps to the next segment. Looped paths wrap around to
    the first waypoint.
    """

    def __init__(self, waypoints: Sequence, speed: float, loop: bool = False):
        pts = np.asarray([[p[0], p[1]] for p in waypoints], dtype=float)
        if len(pts) < 2:
            raise ValueError("waypoint path needs >= 2 waypoints")
        if loop and not np.allclose(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[0]])
        self.points = pts
        self.speed = float(speed)
        self.loop = loop
        seg = np.diff(pts, axis=0)
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(self._seg_len <= 0):
            raise ValueError("waypoint path has zero-length segments")
        self._cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        self._heading = np.arctan2(seg[:, 1], seg[:, 0])
        self.total_length = float(self._cum[-1])

    def state_at(self, s: float):
        """(position ndarray, heading) at arc length s from the start."""
        if self.loop:
            s = math.fmod(s, self.total_length)
            if s < 0:
                s += self.total_length
        else:
            s = min(max(s, 0.0), self.total_length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg_len) - 1)
        frac = (s - self._cum[i]) / self._seg_len[i]
        a, b = self.points[i], self.points[i + 1]
        pos = a + frac * (b - a)
        return pos, float(self._heading[i])

    def at_end(self, s: float) -> bool:
        return (not self.loop) and s >= self.total_length


@dataclass
class AgentSpec:
    """A sensing agent: static pose or mobile waypoint follower.

    Mobile agents require >= 2 waypoints and a speed; yaw follows the
    current path segment.
    """

    id: int
    sensor: SensorSpec = field(default_factory=SensorSpec)
    pose: Optional[Pose2] = None
    waypoints: Optional[Sequence] = None
    speed: float = 0.0
    loop: bool = False

    def __post_init__(self):
        if self.pose is None and self.waypoints is None:
            raise ValueError(f"agent {self.id}: needs a pose or waypoints")
        if self.waypoints is not None and len(self.waypoints) < 2:
            raise ValueError(f"agent {self.id}: mobile agents need >= 2 waypoints")

    @property
    def mobile(self) -> bool:
        return self.waypoints is not None


@dataclass(frozen=True)
class Detection:
    """One perceived object position in the agent's frame."""

    agent_id: int
    position: Point2
    timestamp: float


@dataclass
class ScenarioConfig:
    """Declarative world description: objects, agents, walls, timing.

    Object entries may carry a motion plan (waypoints/speed/loop); agents
    follow the AgentSpec contract. Walls are ((x1, y1), (x2, y2)) segments.
    """

    duration: float
    dt: float
    objects: list
    agents: list
    walls: list = field(default_factory=list)
    rng_seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.duration < self.dt:
            raise ValueError("duration must be >= dt")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration / self.dt))


class World:
    """Runtime ground-truth state for one scenario instance.

    Single-threaded by design; independent instances may run concurrently.
    """

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.time = 0.0
        self.walls = [(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
                      for a, b in cfg.walls]
        if self.walls:
            self._wall_p = np.array([w[0] for w in self.walls])
            self._wall_e = np.array([w[1] - w[0] for w in self.walls])
        else:
            self._wall_p = np.zeros((0, 2))
            self._wall_e = np.zeros((0, 2))

        self.obj_ids: list = []
        self._pos = np.zeros((len(cfg.objects), 2))
        self._vel = np.zeros((len(cfg.objects), 2))
        self._radius = np.zeros(len(cfg.objects))
        self._paths: list = []
        self._path_s = np.zeros(len(cfg.objects))
        seen = set()
        for i, entry in enumerate(cfg.objects):
            state, plan = entry if isinstance(entry, tuple) else (entry, None)
            if state.id in seen:
                raise ValueError(f"duplicate object id {state.id}")
            seen.add(state.id)
            self.obj_ids.append(state.id)
            self._pos[i] = [state.position.x, state.position.y]
            self._vel[i] = state.velocity
            self._radius[i] = state.radius
            self._paths.append(plan)
            if plan is not None:
                pos, heading = plan.state_at(0.0)
                self._pos[i] = pos
                self._vel[i] = (plan.speed * math.cos(heading),
                                plan.speed * math.sin(heading))

        self.agents = {a.id: a for a in cfg.agents}
        if len(self.agents) != len(cfg.agents):
            raise ValueError("duplicate agent ids")
        self._agent_s = {a.id: 0.0 for a in cfg.agents}
        self._agent_paths = {
            a.id: WaypointPath(a.waypoints, a.speed, a.loop) if a.mobile else None
            for a in cfg.agents
        }
        self._agent_pose = {}
        for a in cfg.agents:
            if a.mobile:
                pos, heading = self._agent_paths[a.id].state_at(0.0)
                self._agent_pose[a.id] = Pose2(pos[0], pos[1], heading)
            else:
                self._agent_pose[a.id] = a.pose
        self._los_cache: dict = {}

    # ------------------------------------------------------------------
    # state access

    def agent_pose(self, agent_id: int) -> Pose2:
        return self._agent_pose[agent_id]

    def object_states(self) -> list:
        """Current ObjectState snapshots, in declaration order."""
        return [
            ObjectState(oid, Point2(p[0], p[1]), (v[0], v[1]), r)
            for oid, p, v, r in zip(self.obj_ids, self._pos, self._vel, self._radius)
        ]

    def object_positions(self) -> np.ndarray:
        return self._pos.copy()

    # ------------------------------------------------------------------
    # dynamics

    def step(self, dt: float) -> None:
        if dt <= 0:
            raise ValueError("dt must be > 0")
        for i, path in enumerate(self._paths):
            if path is None:
                self._pos[i] += self._vel[i] * dt
            else:
                self._path_s[i] += path.speed * dt
                pos, heading = path.state_at(self._path_s[i])
                self._pos[i] = pos
                if path.at_end(self._path_s[i]):
                    self._vel[i] = (0.0, 0.0)
                else:
                    self._vel[i] = (path.speed * math.cos(heading),
                                    path.speed * math.sin(heading))
        for aid, path in self._agent_paths.items():
            if path is None:
                continue
            self._agent_s[aid] += path.speed * dt
            pos, heading = path.state_at(self._agent_s[aid])
            self._agent_pose[aid] = Pose2(pos[0], pos[1], heading)
        self.time += dt
        self._los_cache.clear()

    # ------------------------------------------------------------------
    # sensing

    def scan(self, agent: AgentSpec) -> np.ndarray:
        """Cast the agent's rays and return hit points in the agent frame.

        Rays span [0, 2pi) uniformly in the agent frame; each returns the
        nearest surface (object disk or wall) within max_range, and rays
        with no hit emit no point.
        """
        spec = agent.sensor
        pose = self._agent_pose[agent.id]
        n = spec.n_rays
        az = np.arange(n) * (2.0 * math.pi / n)
        ang = az + pose.yaw
        d = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        o = np.array([pose.x, pose.y])
        t_best = np.full(n, np.inf)

        if len(self._pos):
            rel = self._pos - o                       # (N, 2)
            proj = d @ rel.T                          # (n_rays, N)
            perp2 = (rel * rel).sum(axis=1) - proj ** 2
            r2 = self._radius ** 2
            th = np.sqrt(np.maximum(r2 - perp2, 0.0))
            t = proj - th
            hit = (perp2 <= r2) & (t > _LOS_TOL)
            t = np.where(hit, t, np.inf)
            t_best = np.minimum(t_best, t.min(axis=1))

        if self.walls:
            e = self._wall_e                          # (W, 2)
            w = self._wall_p - o
            denom = d[:, :1] * e[:, 1] - d[:, 1:] * e[:, 0]   # (n, W)
            safe = np.where(np.abs(denom) > _LOS_TOL, denom, 1.0)
            num_t = w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]     # (W,)
            num_u = d[:, 1:] * w[:, 0] - d[:, :1] * w[:, 1]
            t = num_t[None, :] / safe
            u = num_u / safe
            hit = (np.abs(denom) > _LOS_TOL) & (t > _LOS_TOL) & (u >= 0.0) & (u <= 1.0)
            t = np.where(hit, t, np.inf)
            t_best = np.minimum(t_best, t.min(axis=1))

        mask = t_best <= spec.max_range
        t = t_best[mask]
        local = np.stack([t * np.cos(az[mask]), t * np.sin(az[mask])], axis=1)
        return local

    def _line_of_sight_mask(self, agent: AgentSpec) -> np.ndarray:
        """Boolean mask over objects: center visible from the agent.

        Visible means range <= max_range and the segment from the sensor to
        the object center crosses no other object disk and no wall. Cached
        per (agent, frame); the cache clears on every world step.
        """
        cached = self._los_cache.get(agent.id)
        if cached is not None:
            return cached
        pose = self._agent_pose[agent.id]
        o = np.array([pose.x, pose.y])
        n_obj = len(self.obj_ids)
        if n_obj == 0:
            return np.zeros(0, dtype=bool)
        rel = self._pos - o                       # (N, 2) sensor->center
        rng2 = (rel * rel).sum(axis=1)
        ok = rng2 <= self.agents[agent.id].sensor.max_range ** 2

        # Disk occlusion: distance from each occluder center j to the
        # segment o -> center_i, blocked when strictly under radius_j.
        tstar = (rel[None, :, :] * rel[:, None, :]).sum(-1) \
            / np.maximum(rng2[:, None], _LOS_TOL)
        tstar = np.clip(tstar, 0.0, 1.0)          # (i, j): param along o->c_i
        delta = tstar[..., None] * rel[:, None, :] - rel[None, :, :]
        dist2 = (delta * delta).sum(-1)
        blocked = dist2 < (self._radius[None, :] - _LOS_TOL) ** 2
        np.fill_diagonal(blocked, False)
        ok &= ~blocked.any(axis=1)

        # Wall occlusion per (object, wall) pair.
        if self.walls:
            e = self._wall_e                                  # (W, 2)
            w = self._wall_p - o
            denom = rel[:, :1] * e[:, 1] - rel[:, 1:] * e[:, 0]   # (N, W)
            safe = np.where(np.abs(denom) > _LOS_TOL, denom, 1.0)
            num_t = w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]     # (W,)
            num_u = rel[:, 1:] * w[:, 0] - rel[:, :1] * w[:, 1]
            t = num_t[None, :] / safe
            u = num_u / safe
            cross = (np.abs(denom) > _LOS_TOL) & (t > _LOS_TOL) \
                & (t < 1.0 - _LOS_TOL) & (u >= 0.0) & (u <= 1.0)
            ok &= ~cross.any(axis=1)
        self._los_cache[agent.id] = ok
        return ok

    def visible_truths(self, agent: AgentSpec) -> set:
        """Object ids with unobstructed line-of-sight within max_range."""
        mask = self._line_of_sight_mask(agent)
        return {oid for oid, m in zip(self.obj_ids, mask) if m}

    def generate_detections(self, agent: AgentSpec, rng: np.random.Generator,
                            fov: Optional[FovPolygon] = None) -> list:
        """One frame of noisy detections for an agent, in its frame.

        Candidates are the objects with line-of-sight within range; each is
        dropped with probability p_natural_fn, survivors get per-axis
        Gaussian noise, and Poisson(lambda_natural_fp) spurious detections
        are added uniformly inside the current FOV polygon.
        """
        spec = agent.sensor
        pose = self._agent_pose[agent.id]
        mask = self._line_of_sight_mask(agent)
        detections = []
        for pos, visible in zip(self._pos, mask):
            if not visible:
                continue
            if spec.p_natural_fn > 0 and rng.random() < spec.p_natural_fn:
                continue
            local = to_local(pose, Point2(pos[0], pos[1]))
            x, y = local.x, local.y
            if spec.noise_sigma > 0:
                dx, dy = rng.normal(0.0, spec.noise_sigma, size=2)
                x, y = x + dx, y + dy
            detections.append(Detection(agent.id, Point2(x, y), self.time))

        n_fp = int(rng.poisson(spec.lambda_natural_fp)) if spec.lambda_natural_fp > 0 else 0
        if n_fp > 0:
            if fov is None:
                fov = estimate_fov(self.scan(agent), spec.max_range, timestamp=self.time)
            for x, y in sample_in_polygon(fov, n_fp, rng):
                detections.append(Detection(agent.id, Point2(x, y), self.time))
        return detections


# ----------------------------------------------------------------------
# Module-level operation wrappers matching the library surface.

def step_world(world: World, dt: float) -> World:
    world.step(dt)
    return world


def scan(agent: AgentSpec, world: World) -> np.ndarray:
    if agent.id not in world.agents:
        raise ValueError(f"agent {agent.id} is not in the world")
    return world.scan(agent)


def generate_detections(agent: AgentSpec, world: World, rng: np.random.Generator,
                        fov: Optional[FovPolygon] = None) -> list:
    return world.generate_detections(agent, rng, fov=fov)


def visible_truths(agent: AgentSpec, world: World) -> set:
    return world.visible_truths(agent)
