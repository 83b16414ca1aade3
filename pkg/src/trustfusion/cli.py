"""Command-line entry points.

  trustfusion run         one scenario under one mode
  trustfusion mc-attacks  Monte Carlo adversary campaign (both modes)
  trustfusion mc-tune     rank trust-model configurations over a corpus
  trustfusion report      summarize record files into plain-text tables

Config errors print a diagnostic with the offending field path and exit
nonzero; successful commands exit 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import configio, records
from .configio import ConfigError
from .harness import McTuneSampler, Mode, mc_attacks, mc_tune, run_scenario
from .scenarios import SCENARIO_NAMES, build_scenario
from .threat import McAttackSampler
from .trust import TrustConfig


def _load_scenario(arg: str, duration: float, dt: float):
    if arg in SCENARIO_NAMES:
        return build_scenario(arg, duration=duration, dt=dt)
    sections = configio.load_config_file(arg)
    if "scenario" not in sections:
        raise ConfigError(arg, "file has no `scenario` section")
    return sections["scenario"]


def _load_threats(arg):
    if arg is None:
        return []
    sections = configio.load_config_file(arg)
    if "threats" not in sections:
        raise ConfigError(arg, "file has no `threat`/`threats` section")
    return sections["threats"]


def _load_trust(arg) -> TrustConfig:
    if arg is None:
        return TrustConfig()
    sections = configio.load_config_file(arg)
    if "trust" not in sections:
        raise ConfigError(arg, "file has no `trust` section")
    return sections["trust"]


def _cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario, args.duration, args.dt)
    threats = _load_threats(args.threat)
    trust_cfg = _load_trust(args.trust_config)
    record = run_scenario(scenario, threats or None, trust_cfg,
                          Mode(args.mode), args.seed,
                          keep_entity_records=args.full_records)
    if args.out:
        records.write_records(args.out, record.to_records())
    _print_summary_table([record.summary | {"run_id": record.run_id,
                                            "scenario": record.scenario_name}])
    return 0


def _cmd_mc_attacks(args) -> int:
    sampler = McAttackSampler()
    if args.config:
        sections = configio.load_config_file(args.config)
        sampler = sections.get("mc_attack", sampler)
    trust_cfg = _load_trust(args.trust_config)
    scenario_names = args.scenarios or list(SCENARIO_NAMES)
    runs = mc_attacks(scenario_names, sampler, args.n, args.seed,
                      trust_cfg=trust_cfg, duration=args.duration, dt=args.dt)
    os.makedirs(args.out_dir, exist_ok=True)
    manifest = []
    for record in runs:
        path = os.path.join(args.out_dir, f"{record.run_id}.jsonl")
        records.write_records(path, record.to_records())
        manifest.append({
            "run_id": record.run_id,
            "scenario": configio.scenario_to_dict(record.scenario_cfg),
            "threats": [configio.threat_to_dict(t) for t in record.threats],
            "seed": record.seed,
            "mode": record.mode.value,
        })
    with open(os.path.join(args.out_dir, "corpus.json"), "w") as fh:
        json.dump({"entries": manifest}, fh, sort_keys=True, indent=1)
    _print_summary_table([r.summary | {"run_id": r.run_id,
                                       "scenario": r.scenario_name}
                          for r in runs])
    return 0


def _cmd_mc_tune(args) -> int:
    with open(os.path.join(args.corpus, "corpus.json")) as fh:
        manifest = json.load(fh)
    entries = []
    for item in manifest["entries"]:
        scenario = configio.scenario_from_dict(item["scenario"])
        threats = [configio.threat_from_dict(t) for t in item["threats"]]
        entries.append((scenario, threats, item["seed"]))
    ranked = mc_tune(entries, McTuneSampler(), args.n_configs, args.seed)
    best, objective = ranked[0]
    print(f"{'rank':>4}  {'objective':>9}  t_ignore  gamma  agent_bias  track_bias")
    for i, (cfg, obj) in enumerate(ranked):
        print(f"{i:>4}  {obj:>9.4f}  {cfg.t_ignore:>8.3f}  {cfg.gamma:>5.2f}"
              f"  {cfg.agent_negativity_bias:>10.2f}"
              f"  {cfg.track_negativity_bias:>10.2f}")
    if args.out:
        import yaml
        with open(args.out, "w") as fh:
            yaml.safe_dump({"trust": configio.trust_config_to_dict(best)}, fh,
                           sort_keys=True)
        print(f"best config (objective {objective:.4f}) written to {args.out}")
    return 0


def _cmd_report(args) -> int:
    rows = []
    for path in args.inputs:
        if os.path.isdir(path):
            for name in sorted(os.listdir(path)):
                if name.endswith(".jsonl"):
                    rows.extend(records.read_records(os.path.join(path, name)))
        else:
            rows.extend(records.read_records(path))
    headers = {r["run_id"]: r for r in rows if r.get("type") == "run_header"}
    summaries = [r for r in rows if r.get("type") == "run_summary"]
    if not summaries:
        print("no run summaries found", file=sys.stderr)
        return 1
    enriched = []
    for s in summaries:
        head = headers.get(s["run_id"], {})
        enriched.append(s | {"scenario": head.get("scenario", "?")})
    _print_summary_table(enriched)
    return 0


def _print_summary_table(summaries) -> None:
    cols = [("run_id", 44), ("scenario", 24), ("mode", 14)]
    stats = [("agg_f1_mean", "F1"), ("agg_ospa_mean", "OSPA"),
             ("agg_ospa_post", "OSPA/post"),
             ("agent_trust_score_mean", "agentTS"),
             ("track_trust_score_mean", "trackTS")]
    header = "".join(f"{name:<{w}}" for name, w in cols)
    header += "".join(f"{label:>10}" for _, label in stats)
    print(header)
    print("-" * len(header))
    for s in summaries:
        line = "".join(f"{str(s.get(name, '?')):<{w}}" for name, w in cols)
        for key, _ in stats:
            val = s.get(key)
            line += f"{val:>10.3f}" if isinstance(val, float) else f"{'-':>10}"
        print(line)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trustfusion",
        description="Security-aware multi-agent sensor fusion simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--scenario", required=True,
                       help=f"built-in name {SCENARIO_NAMES} or a YAML file")
    p_run.add_argument("--threat", help="YAML file with threat/threats section")
    p_run.add_argument("--trust-config", help="YAML file with trust section")
    p_run.add_argument("--mode", default=Mode.SECURITY_AWARE.value,
                       choices=[m.value for m in Mode])
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", help="output records path (.jsonl)")
    p_run.add_argument("--duration", type=float, default=30.0)
    p_run.add_argument("--dt", type=float, default=0.1)
    p_run.add_argument("--full-records", action="store_true",
                       help="include per-entity report/track/trust records")
    p_run.set_defaults(func=_cmd_run)

    p_mc = sub.add_parser("mc-attacks", help="Monte Carlo adversary campaign")
    p_mc.add_argument("--n", type=int, required=True)
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.add_argument("--out-dir", required=True)
    p_mc.add_argument("--scenarios", nargs="*",
                      help="built-in scenario names (default: all)")
    p_mc.add_argument("--trust-config")
    p_mc.add_argument("--config", help="YAML file with an mc_attack section")
    p_mc.add_argument("--duration", type=float, default=30.0)
    p_mc.add_argument("--dt", type=float, default=0.1)
    p_mc.set_defaults(func=_cmd_mc_attacks)

    p_tune = sub.add_parser("mc-tune", help="rank trust configs over a corpus")
    p_tune.add_argument("--n-configs", type=int, required=True)
    p_tune.add_argument("--corpus", required=True,
                        help="mc-attacks output dir (needs corpus.json)")
    p_tune.add_argument("--seed", type=int, default=0)
    p_tune.add_argument("--out", help="write the best trust config as YAML")
    p_tune.set_defaults(func=_cmd_mc_tune)

    p_rep = sub.add_parser("report", help="summarize record files")
    p_rep.add_argument("inputs", nargs="+", help="record files or directories")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
