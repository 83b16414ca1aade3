"""Built-in intersection scenarios.

Three structural analogs of a smart-city crossing: four agents with
complementary, overlapping vantage points watch a two-road intersection
with building-corner occlusions and a mix of crossing and parked objects.

  occluded_approach   7 objects, agent 0 on the south approach behind
                      parked vehicles (occluded ego).
  dense_crossing      7 objects, heavier simultaneous crossing traffic,
                      agent 0 occluded.
  intersection_traversal
                      8 objects, agent 0 drives through the intersection.

Roads run along x = 0 and y = 0 with half-width 8 m; buildings occupy the
four outer quadrants with inner corners at (+/-10, +/-10).
"""

from __future__ import annotations

import math

from .geometry import Point2, Pose2
from .world import AgentSpec, ObjectState, ScenarioConfig, SensorSpec, WaypointPath

__all__ = ["SCENARIO_NAMES", "build_scenario"]

SCENARIO_NAMES = ("occluded_approach", "dense_crossing", "intersection_traversal")

_WALLS = [
    # NE building
    ((10.0, 10.0), (10.0, 34.0)),
    ((10.0, 10.0), (34.0, 10.0)),
    # NW building
    ((-10.0, 10.0), (-10.0, 34.0)),
    ((-10.0, 10.0), (-34.0, 10.0)),
    # SW building
    ((-10.0, -10.0), (-10.0, -34.0)),
    ((-10.0, -10.0), (-34.0, -10.0)),
    # SE building
    ((10.0, -10.0), (10.0, -34.0)),
    ((10.0, -10.0), (34.0, -10.0)),
]


def _sensor() -> SensorSpec:
    return SensorSpec()


def _vehicle(oid, waypoints, speed, radius=1.1):
    state = ObjectState(oid, Point2(*waypoints[0]), (0.0, 0.0), radius)
    return (state, WaypointPath(waypoints, speed, loop=True))


def _pedestrian(oid, waypoints, speed=1.2, radius=0.35):
    state = ObjectState(oid, Point2(*waypoints[0]), (0.0, 0.0), radius)
    return (state, WaypointPath(waypoints, speed, loop=True))


def _parked(oid, x, y, radius=1.2):
    return (ObjectState(oid, Point2(x, y), (0.0, 0.0), radius), None)


def _infra_agents():
    """Three static corner posts with full coverage of the crossing.

    The southwest post sits next to the parked-vehicle pocket so no region
    is privately visible to the ground agent alone. Posts are offset from
    the pedestrian lines (y = +/-9) so no object path passes through a
    sensor origin.
    """
    return [
        AgentSpec(id=1, sensor=_sensor(), pose=Pose2(9.0, 11.0, -3.0 * math.pi / 4.0)),
        AgentSpec(id=2, sensor=_sensor(), pose=Pose2(-9.0, 11.0, -math.pi / 4.0)),
        AgentSpec(id=3, sensor=_sensor(), pose=Pose2(-9.0, -11.0, math.pi / 4.0)),
    ]


# Two-lane circulation rectangles: vehicles loop through the crossing
# continuously, so velocities never flip instantaneously (no track splits
# at path ends). Phase-shifted starts put multiple vehicles on one circuit.
_EW_LOOP = [(-28.0, -4.0), (28.0, -4.0), (28.0, 4.0), (-28.0, 4.0)]
_NS_LOOP = [(-4.0, 28.0), (-4.0, -28.0), (4.0, -28.0), (4.0, 28.0)]


def _rotated(path, k):
    return path[k:] + path[:k]


def _occluded_approach(duration, dt, seed):
    objects = [
        _vehicle(0, _EW_LOOP, 4.0),
        _vehicle(1, _rotated(_EW_LOOP, 2), 3.5),
        _vehicle(2, _NS_LOOP, 4.5),
        _pedestrian(3, [(-12.0, -9.0), (12.0, -9.0)]),
        _parked(4, -3.0, -16.0),
        _parked(5, -5.0, -12.5, radius=1.1),
        _pedestrian(6, [(6.0, 13.0), (12.0, 13.0), (12.0, 7.0)], speed=1.0),
    ]
    agents = [
        AgentSpec(id=0, sensor=_sensor(), pose=Pose2(4.0, -18.0, math.pi / 2.0)),
    ] + _infra_agents()
    return ScenarioConfig(duration, dt, objects, agents, walls=list(_WALLS),
                          rng_seed=seed, name="occluded_approach")


def _dense_crossing(duration, dt, seed):
    objects = [
        _vehicle(0, _EW_LOOP, 5.0),
        _vehicle(1, _rotated(_EW_LOOP, 2), 4.0),
        _vehicle(2, _NS_LOOP, 5.5),
        _vehicle(3, _rotated(_NS_LOOP, 2), 4.5),
        _vehicle(4, _rotated(_EW_LOOP, 1), 6.0, radius=1.0),
        _parked(5, -3.0, -16.0),
        _pedestrian(6, [(-12.0, 9.0), (12.0, 9.0)]),
    ]
    agents = [
        AgentSpec(id=0, sensor=_sensor(), pose=Pose2(4.0, -18.0, math.pi / 2.0)),
    ] + _infra_agents()
    return ScenarioConfig(duration, dt, objects, agents, walls=list(_WALLS),
                          rng_seed=seed, name="dense_crossing")


def _intersection_traversal(duration, dt, seed):
    objects = [
        _vehicle(0, _EW_LOOP, 4.0),
        _vehicle(1, _rotated(_EW_LOOP, 2), 3.5),
        _vehicle(2, _NS_LOOP, 4.5),
        _vehicle(3, _rotated(_NS_LOOP, 2), 4.0),
        _pedestrian(4, [(-12.0, -9.0), (12.0, -9.0)]),
        _pedestrian(5, [(12.0, 9.0), (-12.0, 9.0)]),
        _parked(6, -5.0, 14.0),
        _parked(7, 5.5, 13.0, radius=1.0),
    ]
    agents = [
        AgentSpec(id=0, sensor=_sensor(), waypoints=[(2.0, -24.0), (2.0, 24.0)],
                  speed=3.0),
    ] + _infra_agents()
    return ScenarioConfig(duration, dt, objects, agents, walls=list(_WALLS),
                          rng_seed=seed, name="intersection_traversal")


_BUILDERS = {
    "occluded_approach": _occluded_approach,
    "dense_crossing": _dense_crossing,
    "intersection_traversal": _intersection_traversal,
}


def build_scenario(name: str, duration: float = 30.0, dt: float = 0.1,
                   seed: int = 0) -> ScenarioConfig:
    """Construct a built-in scenario by name."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown scenario '{name}'; choose from {SCENARIO_NAMES}")
    return _BUILDERS[name](duration, dt, seed)
