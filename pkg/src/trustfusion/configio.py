"""Config file parsing: scenarios, threats, and trust models in YAML.

Field names mirror the type definitions one-to-one. Validation failures
raise ConfigError carrying the offending field path, which the CLI turns
into a diagnostic and a nonzero exit code.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import yaml

from .geometry import Point2, Pose2
from .threat import Manifest, McAttackSampler, Temporal, ThreatConfig, TrajectorySpec
from .trust import PropE, PropP, PropV, TrustConfig
from .world import AgentSpec, ObjectState, ScenarioConfig, SensorSpec, WaypointPath

__all__ = [
    "ConfigError",
    "load_config_file",
    "scenario_from_dict",
    "scenario_to_dict",
    "threat_from_dict",
    "threat_to_dict",
    "trust_config_from_dict",
    "trust_config_to_dict",
    "mc_attack_sampler_from_dict",
]


class ConfigError(ValueError):
    """A config failed validation; `path` points at the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _require(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return data[key]


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc


# ----------------------------------------------------------------------
# Scenario

def scenario_from_dict(data: dict, path: str = "scenario") -> ScenarioConfig:
    objects = []
    for i, obj in enumerate(data.get("objects", [])):
        opath = f"{path}.objects[{i}]"
        state = _wrap(opath, ObjectState,
                      id=int(_require(obj, "id", opath)),
                      position=Point2(*_require(obj, "position", opath)),
                      velocity=tuple(obj.get("velocity", (0.0, 0.0))),
                      radius=float(obj.get("radius", 1.0)))
        plan = None
        if obj.get("waypoints"):
            plan = _wrap(opath + ".waypoints", WaypointPath,
                         obj["waypoints"], float(obj.get("speed", 1.0)),
                         bool(obj.get("loop", False)))
        objects.append((state, plan))

    agents = []
    for i, ag in enumerate(data.get("agents", [])):
        apath = f"{path}.agents[{i}]"
        sensor = _wrap(apath + ".sensor", SensorSpec, **ag.get("sensor", {}))
        pose = None
        if "pose" in ag:
            pose = Pose2(*ag["pose"])
        agents.append(_wrap(apath, AgentSpec,
                            id=int(_require(ag, "id", apath)),
                            sensor=sensor,
                            pose=pose,
                            waypoints=ag.get("waypoints"),
                            speed=float(ag.get("speed", 0.0)),
                            loop=bool(ag.get("loop", False))))

    walls = [((w[0][0], w[0][1]), (w[1][0], w[1][1]))
             for w in data.get("walls", [])]
    return _wrap(path, ScenarioConfig,
                 duration=float(_require(data, "duration", path)),
                 dt=float(_require(data, "dt", path)),
                 objects=objects,
                 agents=agents,
                 walls=walls,
                 rng_seed=int(data.get("rng_seed", 0)),
                 name=str(data.get("name", "scenario")))


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    objects = []
    for state, plan in cfg.objects:
        row = {
            "id": state.id,
            "position": [state.position.x, state.position.y],
            "velocity": list(state.velocity),
            "radius": state.radius,
        }
        if plan is not None:
            row["waypoints"] = [list(map(float, p)) for p in plan.points]
            row["speed"] = plan.speed
            row["loop"] = plan.loop
        objects.append(row)
    agents = []
    for ag in cfg.agents:
        row = {"id": ag.id, "sensor": dataclasses.asdict(ag.sensor)}
        if ag.mobile:
            row["waypoints"] = [list(map(float, p)) for p in ag.waypoints]
            row["speed"] = ag.speed
            row["loop"] = ag.loop
        else:
            row["pose"] = [ag.pose.x, ag.pose.y, ag.pose.yaw]
        agents.append(row)
    return {
        "name": cfg.name,
        "duration": cfg.duration,
        "dt": cfg.dt,
        "rng_seed": cfg.rng_seed,
        "objects": objects,
        "agents": agents,
        "walls": [[list(a), list(b)] for a, b in cfg.walls],
    }


# ----------------------------------------------------------------------
# Threat

def threat_from_dict(data: dict, path: str = "threat") -> ThreatConfig:
    trajectory = None
    if data.get("trajectory"):
        tpath = path + ".trajectory"
        tdata = data["trajectory"]
        trajectory = _wrap(tpath, TrajectorySpec,
                           waypoints=[tuple(p) for p in
                                      _require(tdata, "waypoints", tpath)],
                           speed=float(_require(tdata, "speed", tpath)))
    return _wrap(path, ThreatConfig,
                 target_agent_id=int(_require(data, "target_agent_id", path)),
                 manifest=_wrap(path + ".manifest", Manifest,
                                _require(data, "manifest", path)),
                 temporal=_wrap(path + ".temporal", Temporal,
                                data.get("temporal", "Static")),
                 n_fp=int(data.get("n_fp", 1)),
                 n_fn=int(data.get("n_fn", 1)),
                 translation_dist=float(data.get("translation_dist", 5.0)),
                 start_time=float(data.get("start_time", 2.0)),
                 markov_step_sigma=float(data.get("markov_step_sigma", 0.15)),
                 trajectory=trajectory,
                 rng_seed=int(data.get("rng_seed", 0)))


def threat_to_dict(cfg: ThreatConfig) -> dict:
    row = {
        "target_agent_id": cfg.target_agent_id,
        "manifest": cfg.manifest.value,
        "temporal": cfg.temporal.value,
        "n_fp": cfg.n_fp,
        "n_fn": cfg.n_fn,
        "translation_dist": cfg.translation_dist,
        "start_time": cfg.start_time,
        "markov_step_sigma": cfg.markov_step_sigma,
        "rng_seed": cfg.rng_seed,
    }
    if cfg.trajectory is not None:
        row["trajectory"] = {
            "waypoints": [list(map(float, p)) for p in cfg.trajectory.waypoints],
            "speed": cfg.trajectory.speed,
        }
    return row


def mc_attack_sampler_from_dict(data: dict, path: str = "mc_attack") -> McAttackSampler:
    kwargs = {}
    for key in ("lambda_fp", "lambda_fn", "mu_d", "sigma_d", "mu_t", "sigma_t",
                "markov_step_sigma"):
        if key in data:
            kwargs[key] = float(data[key])
    if "agent_choices" in data:
        kwargs["agent_choices"] = tuple(int(a) for a in data["agent_choices"])
    if "scene_choices" in data:
        kwargs["scene_choices"] = tuple(data["scene_choices"])
    if "manifests" in data:
        kwargs["manifests"] = tuple(Manifest(m) for m in data["manifests"])
    if "temporals" in data:
        kwargs["temporals"] = tuple(Temporal(t) for t in data["temporals"])
    return _wrap(path, McAttackSampler, **kwargs)


# ----------------------------------------------------------------------
# Trust model

_PROP_TYPES = {"PropP": PropP, "PropE": PropE, "PropV": PropV}


def _propagator_from(data, path: str):
    if isinstance(data, list):
        return tuple(_propagator_from(d, f"{path}[{i}]") for i, d in enumerate(data))
    kind = _require(data, "type", path)
    if kind not in _PROP_TYPES:
        raise ConfigError(f"{path}.type", f"unknown propagator '{kind}'")
    kwargs = {k: float(v) for k, v in data.items() if k != "type"}
    return _wrap(path, _PROP_TYPES[kind], **kwargs)


def _propagator_to(prop) -> object:
    if isinstance(prop, (tuple, list)):
        return [_propagator_to(p) for p in prop]
    row = {"type": type(prop).__name__}
    row.update(dataclasses.asdict(prop))
    return row


def trust_config_from_dict(data: Optional[dict], path: str = "trust") -> TrustConfig:
    if not data:
        return TrustConfig()
    kwargs = {}
    for key in ("prior_alpha0", "prior_beta0"):
        if key in data:
            val = data[key]
            if not isinstance(val, dict):
                val = {"agent": float(val), "track": float(val)}
            kwargs[key] = {k: float(v) for k, v in val.items()}
    if "propagator" in data:
        kwargs["propagator"] = _propagator_from(data["propagator"], path + ".propagator")
    for key in ("agent_negativity_bias", "agent_negativity_threshold",
                "track_negativity_bias", "track_negativity_threshold",
                "t_ignore", "gamma"):
        if key in data:
            kwargs[key] = float(data[key])
    return _wrap(path, TrustConfig, **kwargs)


def trust_config_to_dict(cfg: TrustConfig) -> dict:
    return {
        "prior_alpha0": dict(cfg.prior_alpha0),
        "prior_beta0": dict(cfg.prior_beta0),
        "propagator": _propagator_to(cfg.propagator),
        "agent_negativity_bias": cfg.agent_negativity_bias,
        "agent_negativity_threshold": cfg.agent_negativity_threshold,
        "track_negativity_bias": cfg.track_negativity_bias,
        "track_negativity_threshold": cfg.track_negativity_threshold,
        "t_ignore": cfg.t_ignore,
        "gamma": cfg.gamma,
    }


# ----------------------------------------------------------------------
# File entry points

def load_config_file(path: str) -> dict:
    """Parse a YAML config file into its typed sections.

    Recognized top-level sections: `scenario`, `threat` (mapping) or
    `threats` (list), `trust`, and `mc_attack`. Returns a dict holding the
    constructed objects for the sections present.
    """
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "top level must be a mapping")
    out = {}
    if "scenario" in raw:
        out["scenario"] = scenario_from_dict(raw["scenario"])
    if "threat" in raw:
        out["threats"] = [threat_from_dict(raw["threat"])]
    if "threats" in raw:
        out.setdefault("threats", []).extend(
            threat_from_dict(t, f"threats[{i}]")
            for i, t in enumerate(raw["threats"]))
    if "trust" in raw:
        out["trust"] = trust_config_from_dict(raw["trust"])
    if "mc_attack" in raw:
        out["mc_attack"] = mc_attack_sampler_from_dict(raw["mc_attack"])
    return out
