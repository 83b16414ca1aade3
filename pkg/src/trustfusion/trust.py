"""Bayesian trust estimation for agents and aggregated tracks.

Trust in an entity is a Beta distribution over [0, 1] (0 = distrusted,
1 = trusted). Each fusion frame runs a hidden-Markov-style cycle:

  1. propagate every trust state forward in time,
  2. turn agreement/disagreement between each agent's reported tracks and
     the aggregate picture into trust pseudomeasurements (PSMs),
  3. update track trusts from track PSMs, then agent trusts from agent
     PSMs computed against the *updated* track trusts (an alternating
     conditional update),

with closed-form conjugate Beta-Bernoulli updates and a negativity bias
that amplifies decidedly-negative evidence so trust is lost faster than
it is gained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np

from .tracking import (ASSOC_GATE, FOV_EXPECT_MARGIN, FOV_MATCH_MARGIN,
                       gated_assignment)

__all__ = [
    "PARAM_FLOOR",
    "TrustDistribution",
    "Psm",
    "PsmPass",
    "PropP",
    "PropE",
    "PropV",
    "TrustConfig",
    "init_trust",
    "propagate",
    "generate_psms",
    "update_trust",
    "update_trust_weighted",
    "TrustStore",
    "TrustEstimator",
]

PARAM_FLOOR = 1e-3  # lower bound on Beta parameters after every operation


@dataclass(frozen=True)
class TrustDistribution:
    """Two-parameter Beta belief over an entity's trustworthiness."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Beta parameters must be positive, got "
                             f"({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def precision(self) -> float:
        return self.alpha + self.beta

    @property
    def variance(self) -> float:
        nu = self.alpha + self.beta
        return self.alpha * self.beta / (nu * nu * (nu + 1.0))


@dataclass(frozen=True)
class Psm:
    """Trust pseudomeasurement: a (value, confidence) pair in [0, 1]^2.

    `target` is the entity being measured; `source` is the entity whose
    data produced the measurement.
    """

    target: int
    value: float
    confidence: float
    source: int = -1

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0 and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"PSM value/confidence must lie in [0, 1], got "
                             f"({self.value}, {self.confidence})")


class PsmPass(Enum):
    TRACK_PASS = "track"
    AGENT_PASS = "agent"


# ----------------------------------------------------------------------
# Propagators

@dataclass(frozen=True)
class PropP:
    """Prior-interpolation propagator: drift parameters back to the prior."""

    omega: float = 0.02

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("PropP omega must be in [0, 1]")

    def apply(self, trust: TrustDistribution, alpha0: float, beta0: float):
        w = self.omega
        return TrustDistribution(
            max((1.0 - w) * trust.alpha + w * alpha0, PARAM_FLOOR),
            max((1.0 - w) * trust.beta + w * beta0, PARAM_FLOOR),
        )


@dataclass(frozen=True)
class PropE:
    """Expectation propagator: move the mean toward a target at constant
    precision."""

    delta_mu: float = 10.0
    mu_bar: float = 0.5

    def __post_init__(self):
        if self.delta_mu <= 0:
            raise ValueError("PropE delta_mu must be > 0")

    def apply(self, trust: TrustDistribution, alpha0: float, beta0: float):
        mu = trust.mean + (self.mu_bar - trust.mean) / self.delta_mu
        mu = min(max(mu, PARAM_FLOOR), 1.0 - PARAM_FLOOR)
        nu = trust.precision
        return TrustDistribution(max(mu * nu, PARAM_FLOOR),
                                 max((1.0 - mu) * nu, PARAM_FLOOR))


@dataclass(frozen=True)
class PropV:
    """Precision propagator: move the precision toward a target at constant
    mean."""

    delta_nu: float = 10.0
    nu_bar: float = 2.0

    def __post_init__(self):
        if self.delta_nu <= 0 or self.nu_bar <= 0:
            raise ValueError("PropV needs delta_nu > 0 and nu_bar > 0")

    def apply(self, trust: TrustDistribution, alpha0: float, beta0: float):
        nu = trust.precision + (self.nu_bar - trust.precision) / self.delta_nu
        mu = trust.mean
        return TrustDistribution(max(mu * nu, PARAM_FLOOR),
                                 max((1.0 - mu) * nu, PARAM_FLOOR))


Propagator = Union[PropP, PropE, PropV, tuple, list]


@dataclass(frozen=True)
class TrustConfig:
    """Trust model parameters: priors, propagator, update weights, fusion.

    Compositions of propagators apply in declared order. Negativity biases
    amplify the beta increment of PSMs whose value falls below the paired
    threshold; T_ignore is the track-flagging level and gamma the exponent
    of the trust-weighted fusion gain.
    """

    prior_alpha0: dict = field(default_factory=lambda: {"agent": 1.0, "track": 1.0})
    prior_beta0: dict = field(default_factory=lambda: {"agent": 1.0, "track": 1.0})
    propagator: Propagator = PropP(0.02)
    agent_negativity_bias: float = 10.0
    agent_negativity_threshold: float = 0.3
    track_negativity_bias: float = 2.5
    track_negativity_threshold: float = 0.3
    t_ignore: float = 0.5
    gamma: float = 0.25

    def __post_init__(self):
        for cls in ("agent", "track"):
            a0 = self.prior_alpha0.get(cls, 0.0)
            b0 = self.prior_beta0.get(cls, 0.0)
            if not (a0 > 0 and b0 > 0):
                raise ValueError(f"prior for class '{cls}' must be positive")
        if self.agent_negativity_bias < 1 or self.track_negativity_bias < 1:
            raise ValueError("negativity biases must be >= 1")
        for name in ("agent_negativity_threshold", "track_negativity_threshold",
                     "t_ignore"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")

    def prior(self, entity_class: str) -> TrustDistribution:
        return TrustDistribution(self.prior_alpha0[entity_class],
                                 self.prior_beta0[entity_class])


def init_trust(cfg: TrustConfig, entity_class: str) -> TrustDistribution:
    """Fresh trust belief for a new agent or track."""
    return cfg.prior(entity_class)


def propagate(trust: TrustDistribution, cfg: TrustConfig,
              entity_class: str = "track") -> TrustDistribution:
    """Advance a trust belief one frame through the configured propagator(s)."""
    props = cfg.propagator
    if not isinstance(props, (tuple, list)):
        props = (props,)
    a0 = cfg.prior_alpha0[entity_class]
    b0 = cfg.prior_beta0[entity_class]
    for p in props:
        trust = p.apply(trust, a0, b0)
    return trust


# ----------------------------------------------------------------------
# Conjugate updates

def update_trust(trust: TrustDistribution, psms: Iterable[Psm]) -> TrustDistribution:
    """Closed-form Beta-Bernoulli posterior from a batch of PSMs.

    alpha gains sum(c * v), beta gains sum(c * (1 - v)); an empty batch
    returns the belief unchanged. Order-independent by construction.
    """
    da = 0.0
    db = 0.0
    for p in psms:
        da += p.confidence * p.value
        db += p.confidence * (1.0 - p.value)
    return TrustDistribution(max(trust.alpha + da, PARAM_FLOOR),
                             max(trust.beta + db, PARAM_FLOOR))


def update_trust_weighted(trust: TrustDistribution, psms: Iterable[Psm],
                          bias: float, threshold: float) -> TrustDistribution:
    """Negativity-weighted conjugate update.

    PSMs whose value is below `threshold` have their beta increment
    multiplied by `bias` (>= 1): decidedly negative evidence erodes trust
    faster than affirmative evidence builds it.
    """
    if bias < 1.0:
        raise ValueError("negativity bias must be >= 1")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("negativity threshold must be in [0, 1]")
    da = 0.0
    db = 0.0
    for p in psms:
        w = bias if p.value < threshold else 1.0
        da += p.confidence * p.value
        db += w * p.confidence * (1.0 - p.value)
    return TrustDistribution(max(trust.alpha + da, PARAM_FLOOR),
                             max(trust.beta + db, PARAM_FLOOR))


# ----------------------------------------------------------------------
# PSM generation

def _default_trust() -> TrustDistribution:
    return TrustDistribution(1.0, 1.0)


def build_psm_context(reports: list, agg_tracks: list) -> list:
    """Geometry shared by both PSM passes within a frame.

    Per report: the gated assignment of its global tracks to the aggregate
    tracks, plus each aggregate track's radial position relative to the
    report's FOV boundary. Track positions do not move between the two
    passes (updates only touch trust), so this is computed once per frame.

    The match-side test uses the exact boundary; the expect-side test uses
    the silhouette-conservative boundary so bin quantization at occluder
    edges cannot manufacture "expected but unseen" evidence.

    Returns [(report, matched_indices, r, bound, bound_cons)] in ascending
    agent id.
    """
    ctx = []
    if not agg_tracks:
        return ctx
    apos = np.array([tr.position for tr in agg_tracks])
    for rep in sorted(reports, key=lambda r: r.agent_id):
        fov_global = rep.fov_global()
        if rep.tracks:
            gpos = np.array([tr.position for tr in rep.tracks_global()])
        else:
            gpos = np.zeros((0, 2))
        pairs, _, _ = gated_assignment(apos, gpos, ASSOC_GATE)
        matched_agg = {i for i, _ in pairs}
        rel = apos - [fov_global.origin.x, fov_global.origin.y]
        r = np.hypot(rel[:, 0], rel[:, 1])
        az = np.arctan2(rel[:, 1], rel[:, 0])
        bound = fov_global.radial_bound(az)
        half_bin = math.pi / max(len(fov_global.vertices), 1)
        bound_cons = fov_global.radial_bound_conservative(az, half_bin)
        ctx.append((rep, matched_agg, r, bound, bound_cons))
    return ctx


SURFACE_EVIDENCE_SLACK = 1.8  # m past a scan return still "on" that surface


def psms_from_context(ctx: list, agg_tracks: list, agent_trusts: dict,
                      track_trusts: dict, which: PsmPass) -> list:
    """Emit one PSM pass from a precomputed frame context.

    The expected-but-unseen (negative) branch fires only when the evidence
    is unambiguous:

      * only for confirmed aggregate tracks (newborns are still being
        acquired by honest agents and carry no decision weight yet);
      * never when another aggregate track this agent matched lies within
        the association gate (near-duplicates steal the assignment from
        each other, which is bookkeeping, not disagreement);
      * when the track is clearly inside the silhouette-safe visibility
        region, or when the agent's own scan returned a surface at this
        very spot while the agent reported nothing there (the signature of
        a suppressed detection: the boundary of an estimated FOV lies on
        the surfaces the sensor actually hit).
    """
    psms: list = []
    apos = np.array([tr.position for tr in agg_tracks]).reshape(-1, 2)
    for rep, matched_agg, r, bound, bound_cons in ctx:
        a_trust = agent_trusts.get(rep.agent_id) or _default_trust()
        mpos = apos[sorted(matched_agg)] if matched_agg else np.zeros((0, 2))
        has_return = bound < rep.fov.max_range - 1e-6
        for i, agg in enumerate(agg_tracks):
            t_trust = track_trusts.get(agg.id) or _default_trust()
            if i in matched_agg:
                if r[i] > bound[i] + FOV_MATCH_MARGIN:
                    continue
                if which is PsmPass.TRACK_PASS:
                    psms.append(Psm(agg.id, 1.0, _unit(a_trust.mean), rep.agent_id))
                else:
                    psms.append(Psm(rep.agent_id, _unit(t_trust.mean),
                                    _unit(1.0 - t_trust.variance), agg.id))
            else:
                if not agg.confirmed:
                    continue
                clearly_inside = r[i] <= bound_cons[i] + FOV_EXPECT_MARGIN
                on_surface = has_return[i] and \
                    -0.5 <= r[i] - bound[i] <= SURFACE_EVIDENCE_SLACK
                if not (clearly_inside or on_surface):
                    continue
                if len(mpos) and np.hypot(*(mpos - apos[i]).T).min() <= ASSOC_GATE:
                    continue
                if which is PsmPass.TRACK_PASS:
                    psms.append(Psm(agg.id, 0.0, _unit(a_trust.mean), rep.agent_id))
                else:
                    psms.append(Psm(rep.agent_id, _unit(1.0 - t_trust.mean),
                                    _unit(1.0 - t_trust.variance), agg.id))
    return psms


def generate_psms(reports: list, agg_tracks: list, agent_trusts: dict,
                  track_trusts: dict, which: PsmPass) -> list:
    """Map report/aggregate agreement into trust pseudomeasurements.

    Per agent, its reported tracks (mapped to the global frame) are
    assigned to the aggregate tracks with the standard gate. For each
    aggregate track within the agent's field of view:

      matched    -> track PSM (v=1, c=E[agent trust]);
                    agent PSM (v=E[track trust], c=1-Var[track trust])
      unmatched  -> track PSM (v=0, c=E[agent trust]);
                    agent PSM (v=1-E[track trust], c=1-Var[track trust])

    Aggregate tracks outside the FOV contribute nothing. Matched tracks
    use a forgiving radial margin (the FOV boundary sits on detected
    surfaces); an unmatched track must be clearly inside the boundary
    before it is treated as expected-but-unseen. Entities missing from the
    trust dicts fall back to a uniform prior.
    """
    ctx = build_psm_context(reports, agg_tracks)
    return psms_from_context(ctx, agg_tracks, agent_trusts, track_trusts, which)


def _unit(x: float) -> float:
    return min(max(x, 0.0), 1.0)


# ----------------------------------------------------------------------
# Estimator state

class TrustStore:
    """Instrumented container of per-entity trust beliefs.

    Read/write counters exist so runs can assert that the no-security
    baseline never touches trust state.
    """

    def __init__(self):
        self._agents: dict = {}
        self._tracks: dict = {}
        self.reads = 0
        self.writes = 0

    def _table(self, entity_class: str) -> dict:
        return self._agents if entity_class == "agent" else self._tracks

    def get(self, entity_class: str, entity_id: int) -> Optional[TrustDistribution]:
        self.reads += 1
        return self._table(entity_class).get(entity_id)

    def set(self, entity_class: str, entity_id: int, trust: TrustDistribution) -> None:
        self.writes += 1
        self._table(entity_class)[entity_id] = trust

    def drop_missing_tracks(self, live_ids: set) -> None:
        stale = [tid for tid in self._tracks if tid not in live_ids]
        for tid in stale:
            self.writes += 1
            del self._tracks[tid]

    def agent_ids(self) -> list:
        return sorted(self._agents)

    def track_ids(self) -> list:
        return sorted(self._tracks)

    def agents_view(self) -> dict:
        self.reads += 1
        return dict(self._agents)

    def tracks_view(self) -> dict:
        self.reads += 1
        return dict(self._tracks)


class TrustEstimator:
    """Per-frame trust estimation over all agents and aggregate tracks.

    One invocation of :meth:`step` per fusion frame: propagate, generate
    track PSMs against the prior agent trusts, update track trusts,
    generate agent PSMs against the updated track trusts, update agent
    trusts. Each entity updates independently.
    """

    def __init__(self, cfg: TrustConfig):
        self.cfg = cfg
        self.store = TrustStore()

    def step(self, reports: list, agg_tracks: list) -> None:
        cfg = self.cfg
        store = self.store

        live_track_ids = {tr.id for tr in agg_tracks}
        store.drop_missing_tracks(live_track_ids)
        for rep in reports:
            if store.get("agent", rep.agent_id) is None:
                store.set("agent", rep.agent_id, init_trust(cfg, "agent"))
        for tr in agg_tracks:
            if store.get("track", tr.id) is None:
                store.set("track", tr.id, init_trust(cfg, "track"))

        for aid in store.agent_ids():
            store.set("agent", aid, propagate(store.get("agent", aid), cfg, "agent"))
        for tid in store.track_ids():
            store.set("track", tid, propagate(store.get("track", tid), cfg, "track"))

        if not reports:
            return

        ctx = build_psm_context(reports, agg_tracks)
        agent_view = store.agents_view()
        track_view = store.tracks_view()
        track_psms = psms_from_context(ctx, agg_tracks, agent_view, track_view,
                                       PsmPass.TRACK_PASS)
        by_track: dict = {}
        for p in track_psms:
            by_track.setdefault(p.target, []).append(p)
        for tid, batch in by_track.items():
            store.set("track", tid, update_trust_weighted(
                store.get("track", tid), batch,
                cfg.track_negativity_bias, cfg.track_negativity_threshold))

        track_view = store.tracks_view()  # post-update track trusts
        agent_psms = psms_from_context(ctx, agg_tracks, agent_view, track_view,
                                       PsmPass.AGENT_PASS)
        by_agent: dict = {}
        for p in agent_psms:
            by_agent.setdefault(p.target, []).append(p)
        for aid, batch in by_agent.items():
            store.set("agent", aid, update_trust_weighted(
                store.get("agent", aid), batch,
                cfg.agent_negativity_bias, cfg.agent_negativity_threshold))

    def fusion_weights(self, agent_ids: Iterable[int]) -> dict:
        """Trust-weighted gain factors E[trust]^gamma per agent."""
        out = {}
        for aid in agent_ids:
            trust = self.store.get("agent", aid)
            mean = trust.mean if trust is not None else \
                self.cfg.prior("agent").mean
            out[aid] = mean ** self.cfg.gamma
        return out

    def track_trusts(self) -> dict:
        return self.store.tracks_view()

    def agent_trusts(self) -> dict:
        return self.store.agents_view()

    def snapshot(self, timestamp: float) -> list:
        """Per-frame trust records: one dict per entity.

        flagged means the mean fell below the ignore threshold (for both
        entity classes; only track flags affect the published picture).
        """
        rows = []
        for cls, view in (("agent", self.store.agents_view()),
                          ("track", self.store.tracks_view())):
            for eid in sorted(view):
                d = view[eid]
                rows.append({
                    "t": timestamp,
                    "entity": cls,
                    "id": eid,
                    "alpha": d.alpha,
                    "beta": d.beta,
                    "mean": d.mean,
                    "variance": d.variance,
                    "flagged": bool(d.mean < self.cfg.t_ignore),
                })
        return rows
