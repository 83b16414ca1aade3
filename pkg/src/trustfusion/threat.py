"""Adversary models applied in postprocessing to one agent's detections.

An attack is described by what it does in a single frame (inject false
positives, remove true objects, or translate detections) and how it evolves
over frames (spatially fixed, random walk, or a scripted trajectory obeying
plausible dynamics). Attack geometry is held in the global frame so that
"static" means spatially fixed even for a moving target agent; detections
enter and leave in the agent frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .fov import FovPolygon
from .geometry import Point2, Pose2, sample_in_polygon, to_global, to_local
from .world import Detection, WaypointPath

__all__ = [
    "Manifest",
    "Temporal",
    "ThreatConfig",
    "TrajectorySpec",
    "McAttackSampler",
    "AttackState",
    "apply_attack",
    "sample_attack",
]

ASSOC_GATE = 2.0  # m, the association gate used across the pipeline


class Manifest(str, Enum):
    FALSE_POSITIVE = "FalsePositive"
    FALSE_NEGATIVE = "FalseNegative"
    TRANSLATION = "Translation"


class Temporal(str, Enum):
    STATIC = "Static"
    MARKOVIAN = "Markovian"
    TRAJECTORY = "Trajectory"


@dataclass(frozen=True)
class TrajectorySpec:
    """Scripted waypoint path followed by trajectory-temporal threats."""

    waypoints: Sequence
    speed: float

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("trajectory needs >= 2 waypoints")
        if self.speed <= 0:
            raise ValueError("trajectory speed must be > 0")


@dataclass(frozen=True)
class ThreatConfig:
    """One adversary instance bound to one agent's detection stream.

    Temporal is ignored for the FalseNegative manifest: its targets are
    persistent object ids, not paths.
    """

    target_agent_id: int
    manifest: Manifest
    temporal: Temporal = Temporal.STATIC
    n_fp: int = 1
    n_fn: int = 1
    translation_dist: float = 5.0
    start_time: float = 2.0
    markov_step_sigma: float = 0.15
    trajectory: Optional[TrajectorySpec] = None
    rng_seed: int = 0
    # Phantoms seed uniformly in the victim's FOV, but no farther than this
    # radius: attackers target the contested space, not the sensor's rim.
    fp_seed_range: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "manifest", Manifest(self.manifest))
        object.__setattr__(self, "temporal", Temporal(self.temporal))
        if self.n_fp < 0 or self.n_fn < 0:
            raise ValueError("attack counts must be >= 0")
        if not math.isfinite(self.translation_dist):
            raise ValueError("translation_dist must be finite")
        if self.start_time < 0:
            raise ValueError("start_time must be >= 0")
        if self.markov_step_sigma < 0:
            raise ValueError("markov_step_sigma must be >= 0")
        if (self.manifest is not Manifest.FALSE_NEGATIVE
                and self.temporal is Temporal.TRAJECTORY and self.trajectory is None):
            raise ValueError(f"{self.manifest.value} x Trajectory requires a trajectory spec")

    def is_null(self) -> bool:
        """True when the attack can never alter a detection stream."""
        if self.manifest is Manifest.FALSE_POSITIVE:
            return self.n_fp == 0
        if self.manifest is Manifest.FALSE_NEGATIVE:
            return self.n_fn == 0
        return self.translation_dist == 0.0


@dataclass
class AttackState:
    """Mutable per-run adversary state, owned by one scenario run."""

    started: bool = False
    fp_points: Optional[np.ndarray] = None       # (k, 2) global phantom positions
    fp_offsets: Optional[np.ndarray] = None      # (k, 2) offsets from path reference
    fn_targets: tuple = ()
    translation_offset: Optional[np.ndarray] = None
    translation_dir: Optional[np.ndarray] = None
    path: Optional[WaypointPath] = None
    path_s: float = 0.0
    start_t: float = 0.0


FP_SEED_INNER_MARGIN = 1.0  # m clear of the FOV boundary for phantom seeds


def _sample_in_fov(fov: FovPolygon, n: int, max_radius: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from the FOV polygon clipped to a seeding radius.

    Candidates hug neither the boundary (a phantom on a surface the victim
    reports would be exposed immediately) nor exceed the seeding radius.
    The polygon is star-shaped about the sensor, so the accepted region is
    never empty and rejection sampling terminates.
    """
    out = np.zeros((n, 2))
    got = 0
    while got < n:
        cand = sample_in_polygon(fov, max(2 * (n - got), 8), rng)
        rel = cand - [fov.origin.x, fov.origin.y]
        r = np.hypot(rel[:, 0], rel[:, 1])
        bound = fov.radial_bound(np.arctan2(rel[:, 1], rel[:, 0]))
        keep = cand[(r <= max_radius) & (r <= bound - FP_SEED_INNER_MARGIN)]
        take = min(len(keep), n - got)
        out[got:got + take] = keep[:take]
        got += take
    return out


def _start_attack(cfg: ThreatConfig, truths_visible: dict, pose: Pose2,
                  fov: Optional[FovPolygon], t: float,
                  rng: np.random.Generator) -> AttackState:
    """Draw the one-time attack geometry at onset."""
    state = AttackState(started=True, start_t=t)
    if cfg.manifest is Manifest.FALSE_POSITIVE:
        if fov is None:
            # Fall back to seeding within a disk around the agent.
            ang = rng.uniform(0.0, 2.0 * math.pi, cfg.n_fp)
            rad = cfg.fp_seed_range * np.sqrt(rng.uniform(0.0, 1.0, cfg.n_fp))
            local = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        else:
            local = _sample_in_fov(fov, cfg.n_fp, cfg.fp_seed_range, rng)
        points = np.array([
            [to_global(pose, Point2(x, y)).x, to_global(pose, Point2(x, y)).y]
            for x, y in local
        ]).reshape(-1, 2)
        state.fp_points = points
        if cfg.temporal is Temporal.TRAJECTORY:
            state.path = WaypointPath(cfg.trajectory.waypoints, cfg.trajectory.speed)
            ref, _ = state.path.state_at(0.0)
            state.fp_offsets = points - ref
            state.path_s = 0.0
    elif cfg.manifest is Manifest.FALSE_NEGATIVE:
        # Persistent targets: the visible objects nearest the victim at
        # onset, the ones it can most consistently invalidate.
        ranked = sorted(
            truths_visible,
            key=lambda oid: (np.hypot(truths_visible[oid][0] - pose.x,
                                      truths_visible[oid][1] - pose.y), oid))
        state.fn_targets = tuple(sorted(ranked[:cfg.n_fn]))
    else:  # Translation
        ang = rng.uniform(0.0, 2.0 * math.pi)
        state.translation_dir = np.array([math.cos(ang), math.sin(ang)])
        if cfg.temporal is Temporal.TRAJECTORY:
            state.translation_offset = np.zeros(2)  # ramps up from zero
        else:
            state.translation_offset = cfg.translation_dist * state.translation_dir
    return state


def _advance(cfg: ThreatConfig, state: AttackState, dt: float,
             rng: np.random.Generator) -> None:
    """Evolve attack geometry by one frame according to the temporal model."""
    if cfg.manifest is Manifest.FALSE_POSITIVE:
        if cfg.temporal is Temporal.MARKOVIAN and cfg.markov_step_sigma > 0:
            state.fp_points = state.fp_points + rng.normal(
                0.0, cfg.markov_step_sigma, size=state.fp_points.shape)
        elif cfg.temporal is Temporal.TRAJECTORY:
            state.path_s += state.path.speed * dt
            ref, _ = state.path.state_at(state.path_s)
            state.fp_points = ref + state.fp_offsets
    elif cfg.manifest is Manifest.TRANSLATION:
        if cfg.temporal is Temporal.MARKOVIAN and cfg.markov_step_sigma > 0:
            state.translation_offset = state.translation_offset + rng.normal(
                0.0, cfg.markov_step_sigma, size=2)
        elif cfg.temporal is Temporal.TRAJECTORY:
            mag = np.hypot(*state.translation_offset)
            mag = min(mag + cfg.trajectory.speed * dt, cfg.translation_dist)
            state.translation_offset = mag * state.translation_dir


def apply_attack(cfg: ThreatConfig, detections: list, truths_visible: dict,
                 pose: Pose2, t: float, state: Optional[AttackState],
                 rng: np.random.Generator, dt: float = 0.1,
                 fov: Optional[FovPolygon] = None):
    """Apply one adversary frame to an agent's detection stream.

    Identity before start_time. At onset the one-time geometry is drawn
    (phantom seeds in the agent's current FOV, persistent FN target ids,
    translation direction); afterwards it evolves per the temporal model.

    Args:
        detections: the agent's detections this frame (agent frame).
        truths_visible: {object_id: global (x, y)} currently visible truths,
            used for FN targeting and translation association.
        pose: the target agent's pose at time t.
        state: adversary state from the previous frame (None on first call).
        dt: frame period, used by trajectory/walk evolution.
        fov: the agent's current FOV polygon (agent frame) for FP seeding.

    Returns:
        (modified detections, new attack state)
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if state is None:
        state = AttackState()
    if t < cfg.start_time:
        return list(detections), state

    if not state.started:
        state = _start_attack(cfg, truths_visible, pose, fov, t, rng)
    else:
        _advance(cfg, state, dt, rng)

    out = list(detections)
    if cfg.manifest is Manifest.FALSE_POSITIVE:
        for gx, gy in state.fp_points:
            local = to_local(pose, Point2(gx, gy))
            out.append(Detection(cfg.target_agent_id, local, t))
    elif cfg.manifest is Manifest.FALSE_NEGATIVE:
        for oid in state.fn_targets:
            if oid not in truths_visible:
                continue
            tx, ty = truths_visible[oid]
            target_local = to_local(pose, Point2(tx, ty))
            best, best_d = None, ASSOC_GATE
            for i, det in enumerate(out):
                d = det.position.distance_to(target_local)
                if d <= best_d:
                    best, best_d = i, d
            if best is not None:
                out.pop(best)
    else:  # Translation: shift the whole stream by the current offset
        off_local = np.array([[state.translation_offset[0]],
                              [state.translation_offset[1]]])
        rot = pose.rotation().T  # global offset expressed in the agent frame
        dx, dy = (rot @ off_local).ravel()
        out = [Detection(d.agent_id, Point2(d.position.x + dx, d.position.y + dy),
                         d.timestamp) for d in out]
    return out, state


@dataclass(frozen=True)
class McAttackSampler:
    """Random adversary generator for Monte Carlo campaigns.

    Counts are Poisson, translation distance and pre-attack wait are
    Gaussian (wait clamped >= 0), the attacked agent and base scene are
    uniform choices.
    """

    lambda_fp: float = 2.0
    lambda_fn: float = 2.0
    mu_d: float = 5.0
    sigma_d: float = 2.0
    mu_t: float = 2.0
    sigma_t: float = 0.5
    agent_choices: tuple = (0, 1, 2, 3)
    scene_choices: tuple = ()
    manifests: tuple = (Manifest.FALSE_POSITIVE, Manifest.FALSE_NEGATIVE,
                        Manifest.TRANSLATION)
    temporals: tuple = (Temporal.STATIC, Temporal.MARKOVIAN)
    markov_step_sigma: float = 0.15

    def __post_init__(self):
        if self.lambda_fp <= 0 or self.lambda_fn <= 0:
            raise ValueError("rates must be > 0")
        if self.sigma_d < 0 or self.sigma_t < 0:
            raise ValueError("sigmas must be >= 0")


def sample_attack(sampler: McAttackSampler, rng: np.random.Generator) -> ThreatConfig:
    """Draw one ThreatConfig from the sampler's distributions."""
    agent = int(sampler.agent_choices[rng.integers(len(sampler.agent_choices))])
    manifest = sampler.manifests[rng.integers(len(sampler.manifests))]
    temporal = sampler.temporals[rng.integers(len(sampler.temporals))]
    n_fp = int(rng.poisson(sampler.lambda_fp))
    n_fn = int(rng.poisson(sampler.lambda_fn))
    dist = float(rng.normal(sampler.mu_d, sampler.sigma_d)) if sampler.sigma_d > 0 \
        else sampler.mu_d
    start = float(rng.normal(sampler.mu_t, sampler.sigma_t)) if sampler.sigma_t > 0 \
        else sampler.mu_t
    seed = int(rng.integers(0, 2 ** 31 - 1))
    return ThreatConfig(
        target_agent_id=agent,
        manifest=manifest,
        temporal=temporal,
        n_fp=n_fp,
        n_fn=n_fn,
        translation_dist=abs(dist),
        start_time=max(start, 0.0),
        markov_step_sigma=sampler.markov_step_sigma,
        rng_seed=seed,
    )


def sample_scene(sampler: McAttackSampler, rng: np.random.Generator):
    """Uniform base-scene choice, or None when the sampler has no scenes."""
    if not sampler.scene_choices:
        return None
    return sampler.scene_choices[rng.integers(len(sampler.scene_choices))]
