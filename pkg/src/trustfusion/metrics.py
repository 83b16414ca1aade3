"""Assignment metrics, OSPA, and trust-quality scoring.

Precision/recall/F1 come from gated bipartite assignment between tracks
and truths. OSPA is the classical optimal subpattern assignment metric on
finite point sets. Trust scores compare an entity's Beta trust belief
against a binary target (trusted/distrusted) via the area between their
CDFs, which reduces in closed form to the Beta mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tracking import ASSOC_GATE, gated_assignment
from .trust import TrustDistribution

__all__ = [
    "TrustTarget",
    "FrameMetrics",
    "assignment_metrics",
    "ospa",
    "track_trust_score",
    "trust_distance",
    "track_trust_target",
    "track_trust_targets",
    "agent_trust_target",
]


class TrustTarget(Enum):
    TRUSTED = "trusted"
    DISTRUSTED = "distrusted"


def _as_points(entities) -> np.ndarray:
    """Coerce tracks/truths/arrays into an (N, 2) position array."""
    if isinstance(entities, np.ndarray):
        return entities.reshape(-1, 2).astype(float)
    pts = []
    for e in entities:
        pos = getattr(e, "position", e)
        if hasattr(pos, "x"):
            pts.append([pos.x, pos.y])
        else:
            pos = np.asarray(pos, dtype=float).ravel()
            pts.append([pos[0], pos[1]])
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def assignment_metrics(tracks, truths, gate: float = ASSOC_GATE):
    """Precision, recall, F1 from gated bipartite assignment.

    Matches within the gate are true positives, lone tracks false
    positives, lone truths false negatives. Empty-vs-empty defines the
    0/0 ratios as 1; any other 0/0 is 0.
    """
    a = _as_points(tracks)
    b = _as_points(truths)
    pairs, _, _ = gated_assignment(a, b, gate)
    tp = len(pairs)
    fp = len(a) - tp
    fn = len(b) - tp
    if len(a) == 0 and len(b) == 0:
        return 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return precision, recall, f1


def ospa(tracks, truths, c: float = 10.0, p: float = 1.0) -> float:
    """Classical OSPA distance between two finite point sets.

    With n = max cardinality, m = min, and the optimal assignment of the
    smaller set into the larger under cutoff distances:

        OSPA = [ (1/n) ( sum_matched min(d_i, c)^p + c^p (n - m) ) ]^(1/p)

    Zero when both sets are empty. A proper metric for c > 0, p >= 1.
    """
    if c <= 0:
        raise ValueError("c must be > 0")
    if p < 1:
        raise ValueError("p must be >= 1")
    X = _as_points(tracks)
    Y = _as_points(truths)
    if len(X) > len(Y):
        X, Y = Y, X
    m, n = len(X), len(Y)
    if n == 0:
        return 0.0
    if m == 0:
        return float(c)
    diff = X[:, None, :] - Y[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    D = np.full((n, n), float(c) ** p)
    D[:m, :] = np.minimum(dist, c) ** p
    rows, cols = linear_sum_assignment(D)
    total = float(D[rows, cols].sum())
    return float((total / n) ** (1.0 / p))


def trust_distance(trust: TrustDistribution, target: TrustTarget) -> float:
    """Area between the trust CDF and the binary target CDF.

    Integration by parts collapses the CDF-area integral to the Beta mean:
    distance = mean for a distrusted target, 1 - mean for a trusted one.
    """
    if target is TrustTarget.DISTRUSTED:
        return trust.mean
    return 1.0 - trust.mean


def track_trust_score(trust: TrustDistribution, target: TrustTarget) -> float:
    """Trust-quality score in [0, 1]: one minus the CDF-area distance."""
    return 1.0 - trust_distance(trust, target)


def track_trust_target(agg_track, truths, gate: float = ASSOC_GATE) -> TrustTarget:
    """Target class for one track: trusted iff a truth lies within the gate."""
    pos = _as_points([agg_track])[0]
    pts = _as_points(truths)
    if len(pts) == 0:
        return TrustTarget.DISTRUSTED
    d = np.hypot(pts[:, 0] - pos[0], pts[:, 1] - pos[1]).min()
    return TrustTarget.TRUSTED if d <= gate else TrustTarget.DISTRUSTED


def track_trust_targets(tracks, truths, gate: float = ASSOC_GATE) -> list:
    """Joint targets for a track set via bipartite assignment to truths."""
    a = _as_points(tracks)
    b = _as_points(truths)
    pairs, _, _ = gated_assignment(a, b, gate)
    matched = {i for i, _ in pairs}
    return [TrustTarget.TRUSTED if i in matched else TrustTarget.DISTRUSTED
            for i in range(len(a))]


def agent_trust_target(local_tracks, visible_truths, f1_threshold: float = 0.8,
                       oracle_attacked: Optional[bool] = None) -> TrustTarget:
    """Target class for an agent.

    Default mode: the agent is trusted iff the F1 of its local tracks
    against its locally visible truths exceeds the threshold. Oracle mode
    (oracle_attacked not None) instead uses ground-truth knowledge of the
    attacked set.
    """
    if oracle_attacked is not None:
        return TrustTarget.DISTRUSTED if oracle_attacked else TrustTarget.TRUSTED
    if not 0.0 < f1_threshold < 1.0:
        raise ValueError("f1_threshold must be in (0, 1)")
    _, _, f1 = assignment_metrics(local_tracks, visible_truths)
    return TrustTarget.TRUSTED if f1 > f1_threshold else TrustTarget.DISTRUSTED


@dataclass
class FrameMetrics:
    """Per-frame evaluation snapshot.

    `agg_*` scores the published operating picture against all truths;
    `per_agent` holds (precision, recall, f1, ospa) of each agent's
    confirmed local tracks against its visible truths. Trust score means
    are None for runs without trust estimation.
    """

    t: float
    agg_precision: float
    agg_recall: float
    agg_f1: float
    agg_ospa: float
    per_agent: dict = field(default_factory=dict)
    mean_track_trust_score: Optional[float] = None
    mean_agent_trust_score: Optional[float] = None

    def to_record(self) -> dict:
        row = {
            "type": "frame_metrics",
            "t": self.t,
            "agg": {
                "precision": self.agg_precision,
                "recall": self.agg_recall,
                "f1": self.agg_f1,
                "ospa": self.agg_ospa,
            },
            "agents": {
                str(k): {"precision": v[0], "recall": v[1], "f1": v[2], "ospa": v[3]}
                for k, v in sorted(self.per_agent.items())
            },
        }
        row["mean_track_trust_score"] = self.mean_track_trust_score
        row["mean_agent_trust_score"] = self.mean_agent_trust_score
        return row
