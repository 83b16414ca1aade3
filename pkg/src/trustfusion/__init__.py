"""trustfusion: security-aware multi-agent sensor fusion at desk scale.

A synthetic 2D tracking world with occlusion-aware sensing, adversary
models on detection streams, agent-local Kalman tracking, Bayesian trust
estimation over agents and fused tracks, trust-informed aggregation, and
the metrics to evaluate all of it.
"""

from .fov import FovPolygon, estimate_fov, expected_visible
from .geometry import (Point2, Pose2, StarPolygon, contains,
                       segment_circle_intersect, to_global, to_local)
from .harness import (McTuneSampler, Mode, RunRecord, fuse_and_score,
                      mc_attacks, mc_tune, run_scenario, simulate_frames)
from .metrics import (TrustTarget, agent_trust_target, assignment_metrics,
                      ospa, track_trust_score, track_trust_target)
from .scenarios import SCENARIO_NAMES, build_scenario
from .threat import (Manifest, McAttackSampler, Temporal, ThreatConfig,
                     apply_attack, sample_attack)
from .tracking import AgentReport, Aggregator, AggTrack, LocalTracker, Track
from .trust import (Psm, PsmPass, TrustConfig, TrustDistribution,
                    TrustEstimator, generate_psms, init_trust, propagate,
                    update_trust, update_trust_weighted)
from .world import (AgentSpec, Detection, ObjectState, ScenarioConfig,
                    SensorSpec, World, generate_detections, scan, step_world,
                    visible_truths)

__version__ = "0.1.0"
