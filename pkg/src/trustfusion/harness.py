"""Scenario runner, Monte Carlo adversary campaigns, and parameter tuning.

A run separates cleanly into two stages. The agent-local stage (world
stepping, scanning, FOV estimation, detection generation, attacks, local
tracking) depends only on the scenario, threats, and seed, so it is
simulated once and its per-frame report log is reused by every fusion
mode. The aggregator stage (fusion, trust estimation, metrics) consumes
that log under either mode:

  NoSecurity      unweighted fusion, no flagging; trust state is never
                  read or written (instrumented and asserted).
  SecurityAware   trust-weighted gains, track flagging, and one trust
                  estimation step per frame.

Everything is deterministic given configs and a seed: identical runs
produce byte-identical serialized records.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .configio import threat_to_dict, trust_config_to_dict
from .fov import DEFAULT_N_BINS, estimate_fov
from .metrics import (FrameMetrics, TrustTarget, assignment_metrics, ospa,
                      track_trust_score, track_trust_targets)
from .scenarios import build_scenario
from .threat import (AttackState, Manifest, McAttackSampler, ThreatConfig,
                     apply_attack, sample_attack)
from .tracking import Aggregator, LocalTracker, TrackerConfig
from .trust import TrustConfig, TrustEstimator
from .world import ScenarioConfig, World

__all__ = [
    "Mode",
    "RunRecord",
    "McTuneSampler",
    "simulate_frames",
    "fuse_and_score",
    "run_scenario",
    "mc_attacks",
    "mc_tune",
    "sample_trust_config",
]

POST_ATTACK_DELAY = 1.0  # s after attack onset excluded from the window
OSPA_CUTOFF = 10.0
OSPA_ORDER = 1.0
F1_ORACLE_THRESHOLD = 0.8


class Mode(str, Enum):
    NO_SECURITY = "NoSecurity"
    SECURITY_AWARE = "SecurityAware"


# ----------------------------------------------------------------------
# Stage 1: agent-local simulation

@dataclass
class SimFrame:
    """One frame of ground truth and agent outputs."""

    t: float
    truth_ids: list
    truth_points: np.ndarray
    reports: dict                 # agent_id -> AgentReport
    visible_ids: dict             # agent_id -> set of object ids
    visible_points: dict          # agent_id -> (K, 2) global positions


@dataclass
class SimLog:
    """Replayable agent-local stage output for one (scenario, threats, seed)."""

    scenario: ScenarioConfig
    threats: list
    seed: int
    frames: list
    attacked: dict                # agent_id -> effective attack start time

    @property
    def dt(self) -> float:
        return self.scenario.dt


def _rng(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def simulate_frames(scenario: ScenarioConfig, threats: Sequence[ThreatConfig],
                    seed: int, n_bins: int = DEFAULT_N_BINS,
                    tracker_cfg: TrackerConfig = TrackerConfig()) -> SimLog:
    """Run the agent-local pipeline for every frame of a scenario.

    Per frame and agent: step the world, scan, estimate the FOV, generate
    detections, apply any attack bound to the agent, advance the local
    tracker, and emit the report. Detection streams depend only on
    (scenario, seed, agent), so a benign and an attacked run on the same
    seed share identical pre-attack sensing.
    """
    threats = list(threats)
    world = World(scenario)
    agents = sorted(scenario.agents, key=lambda a: a.id)
    det_rngs = {a.id: _rng(seed, scenario.rng_seed, 100 + a.id) for a in agents}
    attack_rngs = {id(t): _rng(seed, t.rng_seed, 200 + t.target_agent_id)
                   for t in threats}
    attack_states: dict = {id(t): None for t in threats}
    trackers = {a.id: LocalTracker(a.id, scenario.dt, a.sensor.noise_sigma,
                                   tracker_cfg) for a in agents}
    by_target: dict = {}
    for t in threats:
        by_target.setdefault(t.target_agent_id, []).append(t)

    frames = []
    for k in range(scenario.n_frames):
        world.step(scenario.dt)
        t = round((k + 1) * scenario.dt, 9)
        positions = world.object_positions()
        truth_ids = list(world.obj_ids)
        reports, vis_ids, vis_pts = {}, {}, {}
        for agent in agents:
            pose = world.agent_pose(agent.id)
            cloud = world.scan(agent)
            fov = estimate_fov(cloud, agent.sensor.max_range, n_bins, timestamp=t)
            dets = world.generate_detections(agent, det_rngs[agent.id], fov=fov)
            visible = world.visible_truths(agent)
            vis_map = {oid: tuple(positions[i])
                       for i, oid in enumerate(truth_ids) if oid in visible}
            for threat in by_target.get(agent.id, ()):
                dets, attack_states[id(threat)] = apply_attack(
                    threat, dets, vis_map, pose, t, attack_states[id(threat)],
                    attack_rngs[id(threat)], dt=scenario.dt, fov=fov)
            tracker = trackers[agent.id]
            tracker.step(dets, pose, t)
            reports[agent.id] = tracker.report(pose, fov, t)
            vis_ids[agent.id] = visible
            vis_pts[agent.id] = np.array(
                [positions[i] for i, oid in enumerate(truth_ids) if oid in visible]
            ).reshape(-1, 2)
        frames.append(SimFrame(t, truth_ids, positions, reports, vis_ids, vis_pts))

    attacked = {}
    for threat in threats:
        if threat.is_null() or threat.start_time >= scenario.duration:
            continue
        state = attack_states[id(threat)]
        if threat.manifest is Manifest.FALSE_NEGATIVE:
            if state is None or not state.fn_targets:
                continue
        start = threat.start_time
        prev = attacked.get(threat.target_agent_id)
        attacked[threat.target_agent_id] = min(prev, start) if prev is not None else start
    return SimLog(scenario, threats, seed, frames, attacked)


# ----------------------------------------------------------------------
# Stage 2: fusion, trust, metrics

@dataclass
class RunRecord:
    """A complete, replayable evaluation of one run.

    `summary` holds time-averaged metrics over the full run and over the
    post-attack window; it is recomputable from the frame stream.
    """

    run_id: str
    scenario_name: str
    mode: Mode
    seed: int
    threats: list
    trust_cfg: TrustConfig
    frames: list = field(default_factory=list)       # FrameMetrics
    trust_rows: list = field(default_factory=list)
    report_rows: list = field(default_factory=list)
    agg_rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    attacked: dict = field(default_factory=dict)
    scenario_cfg: Optional[ScenarioConfig] = field(default=None, repr=False)

    def to_records(self) -> list:
        rows = [{
            "type": "run_header",
            "run_id": self.run_id,
            "scenario": self.scenario_name,
            "mode": self.mode.value,
            "seed": self.seed,
            "threats": [threat_to_dict(t) for t in self.threats],
            "trust": trust_config_to_dict(self.trust_cfg),
            "attacked": {str(k): v for k, v in sorted(self.attacked.items())},
        }]
        rows.extend(fm.to_record() for fm in self.frames)
        rows.extend(self.report_rows)
        rows.extend(self.agg_rows)
        rows.extend(self.trust_rows)
        rows.append({"type": "run_summary", "run_id": self.run_id, **self.summary})
        return rows


def _run_id(scenario_name: str, mode: Mode, seed: int, threats: list) -> str:
    digest = hashlib.sha256(json.dumps(
        [threat_to_dict(t) for t in threats], sort_keys=True).encode()).hexdigest()[:8]
    return f"{scenario_name}-{mode.value}-s{seed}-{digest}"


def _report_records(frame: SimFrame) -> list:
    rows = []
    for aid in sorted(frame.reports):
        rep = frame.reports[aid]
        rows.append({
            "type": "agent_report",
            "t": frame.t,
            "agent_id": aid,
            "pose": [rep.pose.x, rep.pose.y, rep.pose.yaw],
            "fov": rep.fov.vertex_list(),
            "tracks": [{
                "id": tr.id,
                "state": [float(v) for v in tr.state],
                "covariance": [[float(v) for v in row] for row in tr.covariance],
                "hits": tr.hits,
                "misses": tr.misses,
                "confirmed": tr.confirmed,
            } for tr in rep.tracks],
        })
    return rows


def _agg_records(agg: Aggregator, t: float) -> list:
    return [{
        "type": "agg_track",
        "t": t,
        "id": tr.id,
        "state": [float(v) for v in tr.state],
        "covariance": [[float(v) for v in row] for row in tr.covariance],
        "hits": tr.hits,
        "misses": tr.misses,
        "confirmed": tr.confirmed,
        "flagged": tr.flagged,
        "trust_alpha": tr.trust_alpha,
        "trust_beta": tr.trust_beta,
    } for tr in sorted(agg.tracks, key=lambda x: x.id)]


def fuse_and_score(sim: SimLog, trust_cfg: TrustConfig, mode: Mode,
                   agent_target_mode: str = "oracle",
                   keep_entity_records: bool = False,
                   tracker_cfg: TrackerConfig = TrackerConfig()) -> RunRecord:
    """Run the aggregator stage over a simulated report log and score it.

    In SecurityAware mode each frame performs trust-weighted aggregation,
    flag refresh from the previous frame's trust, one trust estimation
    step, and metric evaluation. In NoSecurity mode the trust estimator is
    constructed but provably untouched (its access counters must stay 0).
    """
    mode = Mode(mode)
    agg = Aggregator(sim.dt, tracker_cfg)
    estimator = TrustEstimator(trust_cfg)
    secure = mode is Mode.SECURITY_AWARE
    record = RunRecord(
        run_id=_run_id(sim.scenario.name, mode, sim.seed, sim.threats),
        scenario_name=sim.scenario.name,
        mode=mode,
        seed=sim.seed,
        threats=list(sim.threats),
        trust_cfg=trust_cfg,
        attacked=dict(sim.attacked),
        scenario_cfg=sim.scenario,
    )

    for frame in sim.frames:
        reports = [frame.reports[aid] for aid in sorted(frame.reports)]
        if secure:
            weights = estimator.fusion_weights(sorted(frame.reports))
            agg.aggregate(reports, weights=weights, timestamp=frame.t)
            agg.apply_flags(estimator.track_trusts(), trust_cfg.t_ignore)
            estimator.step(reports, agg.tracks)
        else:
            agg.aggregate(reports, weights=None, timestamp=frame.t)

        published = agg.published_picture()
        pub_pts = np.array([tr.position for tr in published]).reshape(-1, 2)
        p, r, f1 = assignment_metrics(pub_pts, frame.truth_points)
        agg_ospa = ospa(pub_pts, frame.truth_points, c=OSPA_CUTOFF, p=OSPA_ORDER)

        per_agent = {}
        for aid in sorted(frame.reports):
            rep = frame.reports[aid]
            lpts = np.array([tr.position for tr in rep.tracks_global()]).reshape(-1, 2)
            vpts = frame.visible_points[aid]
            pa, ra, fa = assignment_metrics(lpts, vpts)
            oa = ospa(lpts, vpts, c=OSPA_CUTOFF, p=OSPA_ORDER)
            per_agent[aid] = (pa, ra, fa, oa)

        mean_track_score = None
        mean_agent_score = None
        if secure:
            track_view = estimator.track_trusts()
            live = [tr for tr in agg.tracks if tr.id in track_view]
            if live:
                targets = track_trust_targets(live, frame.truth_points)
                scores = [track_trust_score(track_view[tr.id], tgt)
                          for tr, tgt in zip(live, targets)]
                mean_track_score = float(np.mean(scores))
            agent_view = estimator.agent_trusts()
            ascores = []
            for aid in sorted(frame.reports):
                if aid not in agent_view:
                    continue
                if agent_target_mode == "oracle":
                    start = sim.attacked.get(aid)
                    attacked_now = start is not None and frame.t >= start
                    target = TrustTarget.DISTRUSTED if attacked_now else TrustTarget.TRUSTED
                else:
                    target = TrustTarget.TRUSTED if per_agent[aid][2] > F1_ORACLE_THRESHOLD \
                        else TrustTarget.DISTRUSTED
                ascores.append(track_trust_score(agent_view[aid], target))
            if ascores:
                mean_agent_score = float(np.mean(ascores))

        record.frames.append(FrameMetrics(
            t=frame.t,
            agg_precision=p,
            agg_recall=r,
            agg_f1=f1,
            agg_ospa=agg_ospa,
            per_agent=per_agent,
            mean_track_trust_score=mean_track_score,
            mean_agent_trust_score=mean_agent_score,
        ))
        if keep_entity_records:
            record.report_rows.extend(_report_records(frame))
            record.agg_rows.extend(_agg_records(agg, frame.t))
            if secure:
                record.trust_rows.extend(estimator.snapshot(frame.t))

    if not secure and (estimator.store.reads or estimator.store.writes):
        raise AssertionError("NoSecurity mode touched trust state")
    record.summary = _summarize(record, estimator)
    return record


def _summarize(record: RunRecord, estimator: TrustEstimator) -> dict:
    frames = record.frames
    start = min(record.attacked.values()) + POST_ATTACK_DELAY if record.attacked else 0.0
    window = [fm for fm in frames if fm.t >= start] or frames

    def mean(rows, key):
        vals = [getattr(fm, key) for fm in rows]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    return {
        "mode": record.mode.value,
        "n_frames": len(frames),
        "window_start": start,
        "agg_f1_mean": mean(frames, "agg_f1"),
        "agg_precision_mean": mean(frames, "agg_precision"),
        "agg_recall_mean": mean(frames, "agg_recall"),
        "agg_ospa_mean": mean(frames, "agg_ospa"),
        "agg_f1_post": mean(window, "agg_f1"),
        "agg_precision_post": mean(window, "agg_precision"),
        "agg_recall_post": mean(window, "agg_recall"),
        "agg_ospa_post": mean(window, "agg_ospa"),
        "track_trust_score_mean": mean(frames, "mean_track_trust_score"),
        "agent_trust_score_mean": mean(frames, "mean_agent_trust_score"),
        "track_trust_score_post": mean(window, "mean_track_trust_score"),
        "agent_trust_score_post": mean(window, "mean_agent_trust_score"),
        "trust_reads": estimator.store.reads,
        "trust_writes": estimator.store.writes,
    }


def run_scenario(scenario: Union[str, ScenarioConfig],
                 threat: Union[None, ThreatConfig, Sequence[ThreatConfig]] = None,
                 trust_cfg: Optional[TrustConfig] = None,
                 mode: Mode = Mode.SECURITY_AWARE,
                 seed: int = 0,
                 duration: float = 30.0,
                 dt: float = 0.1,
                 agent_target_mode: str = "oracle",
                 keep_entity_records: bool = False) -> RunRecord:
    """Simulate and score one scenario end to end.

    `scenario` is a built-in name or a full ScenarioConfig; `threat` is
    None, one ThreatConfig, or a list of them (one adversary per agent).
    """
    if isinstance(scenario, str):
        scenario = build_scenario(scenario, duration=duration, dt=dt)
    threats = [] if threat is None else (
        [threat] if isinstance(threat, ThreatConfig) else list(threat))
    trust_cfg = trust_cfg or TrustConfig()
    sim = simulate_frames(scenario, threats, seed)
    return fuse_and_score(sim, trust_cfg, Mode(mode),
                          agent_target_mode=agent_target_mode,
                          keep_entity_records=keep_entity_records)


# ----------------------------------------------------------------------
# Monte Carlo adversary campaign

def mc_attacks(base_scenarios: Sequence[Union[str, ScenarioConfig]],
               sampler: McAttackSampler, n_runs: int, seed: int,
               trust_cfg: Optional[TrustConfig] = None,
               duration: float = 30.0, dt: float = 0.1) -> list:
    """Sample n_runs adversaries and evaluate each under both modes.

    Returns 2 * n_runs RunRecords (NoSecurity and SecurityAware per draw),
    pairwise sharing the same agent-local simulation.
    """
    if n_runs <= 0:
        raise ValueError("n_runs must be > 0")
    trust_cfg = trust_cfg or TrustConfig()
    scenarios = [build_scenario(s, duration=duration, dt=dt)
                 if isinstance(s, str) else s for s in base_scenarios]
    rng = _rng(seed, 777)
    records = []
    for i in range(n_runs):
        scenario = scenarios[int(rng.integers(len(scenarios)))]
        threat = sample_attack(sampler, rng)
        run_seed = int(rng.integers(0, 2 ** 31 - 1))
        sim = simulate_frames(scenario, [threat], run_seed)
        for mode in (Mode.NO_SECURITY, Mode.SECURITY_AWARE):
            records.append(fuse_and_score(sim, trust_cfg, mode))
    return records


# ----------------------------------------------------------------------
# Monte Carlo trust-model tuning

@dataclass(frozen=True)
class McTuneSampler:
    """Random trust-model configurations for tuning campaigns.

    Priors are Gaussian draws (floored at 0.1), negativity biases and
    thresholds uniform, the ignore threshold uniform, and the fusion
    exponent log-uniform.
    """

    mu_alpha0: float = 1.0
    sigma_alpha0: float = 0.25
    mu_beta0: float = 1.0
    sigma_beta0: float = 0.25
    agent_bias_range: tuple = (1.0, 20.0)
    track_bias_range: tuple = (1.0, 10.0)
    threshold_range: tuple = (0.0, 0.6)
    t_ignore_range: tuple = (0.2, 0.8)
    gamma_range: tuple = (0.1, 10.0)
    prop_omega: float = 0.02


def sample_trust_config(sampler: McTuneSampler, rng: np.random.Generator) -> TrustConfig:
    from .trust import PropP

    a0 = max(float(rng.normal(sampler.mu_alpha0, sampler.sigma_alpha0)), 0.1)
    b0 = max(float(rng.normal(sampler.mu_beta0, sampler.sigma_beta0)), 0.1)
    lo, hi = sampler.gamma_range
    gamma = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    return TrustConfig(
        prior_alpha0={"agent": a0, "track": a0},
        prior_beta0={"agent": b0, "track": b0},
        propagator=PropP(sampler.prop_omega),
        agent_negativity_bias=float(rng.uniform(*sampler.agent_bias_range)),
        agent_negativity_threshold=float(rng.uniform(*sampler.threshold_range)),
        track_negativity_bias=float(rng.uniform(*sampler.track_bias_range)),
        track_negativity_threshold=float(rng.uniform(*sampler.threshold_range)),
        t_ignore=float(rng.uniform(*sampler.t_ignore_range)),
        gamma=gamma,
    )


def _corpus_entries(base_runs: Sequence) -> list:
    """Unique (scenario, threats, seed) triples from RunRecords or tuples.

    Mode pairs from an attack campaign collapse to one replayable entry.
    """
    entries = []
    seen = set()
    for run in base_runs:
        if isinstance(run, RunRecord):
            if run.scenario_cfg is None:
                raise ValueError(f"run {run.run_id} lacks its scenario config")
            scenario, threats, run_seed = run.scenario_cfg, run.threats, run.seed
        else:
            scenario, threats, run_seed = run
        key = (scenario.name, json.dumps([threat_to_dict(t) for t in threats],
                                         sort_keys=True), run_seed)
        if key not in seen:
            seen.add(key)
            entries.append((scenario, list(threats), run_seed))
    return entries


def mc_tune(base_runs: Sequence, sampler: McTuneSampler, n_configs: int,
            seed: int, extra_candidates: Sequence[TrustConfig] = (),
            nosec_excess_floor: float = 0.5) -> list:
    """Rank sampled trust configurations over an attack corpus.

    Each candidate is scored as the corpus mean of
    (agent trust score, track trust score, 1 - normalized excess) where
    normalized excess divides the candidate's post-attack OSPA excess by
    the paired NoSecurity excess (clamped to [0, 1]; the denominator is
    floored so attack-free noise cannot dominate). Returns
    [(TrustConfig, objective)] sorted best first.
    """
    if n_configs <= 0:
        raise ValueError("n_configs must be > 0")
    entries = _corpus_entries(base_runs)
    if not entries:
        raise ValueError("empty tuning corpus")
    rng = _rng(seed, 999)
    candidates = [sample_trust_config(sampler, rng) for _ in range(n_configs)]
    candidates.extend(extra_candidates)

    sims = [simulate_frames(sc, th, sd) for sc, th, sd in entries]
    benign_sims = {}
    for sc, _, sd in entries:
        key = (sc.name, sd)
        if key not in benign_sims:
            benign_sims[key] = simulate_frames(sc, [], sd)

    baseline_cfg = TrustConfig()
    nosec_excess = []
    for (sc, _, sd), sim in zip(entries, sims):
        attacked = fuse_and_score(sim, baseline_cfg, Mode.NO_SECURITY)
        benign = fuse_and_score(benign_sims[(sc.name, sd)], baseline_cfg,
                                Mode.NO_SECURITY)
        nosec_excess.append(max(
            attacked.summary["agg_ospa_post"] - benign.summary["agg_ospa_post"], 0.0))

    ranked = []
    for cfg in candidates:
        benign_sa = {key: fuse_and_score(s, cfg, Mode.SECURITY_AWARE)
                     for key, s in benign_sims.items()}
        scores = []
        for (sc, _, sd), sim, base_excess in zip(entries, sims, nosec_excess):
            run = fuse_and_score(sim, cfg, Mode.SECURITY_AWARE)
            sa_excess = max(run.summary["agg_ospa_post"]
                            - benign_sa[(sc.name, sd)].summary["agg_ospa_post"], 0.0)
            denom = max(base_excess, nosec_excess_floor)
            ospa_term = min(max(1.0 - sa_excess / denom, 0.0), 1.0)
            agent_term = run.summary["agent_trust_score_mean"] or 0.0
            track_term = run.summary["track_trust_score_mean"] or 0.0
            scores.append((agent_term + track_term + ospa_term) / 3.0)
        ranked.append((cfg, float(np.mean(scores))))
    ranked.sort(key=lambda pair: pair[1], reverse=True)
    return ranked
