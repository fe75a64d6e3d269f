"""Command-line entry point: train, eval, calibrate and simulate.

Exit codes: 0 success, 1 usage or configuration problem, 2 runtime
failure (I/O, corrupt checkpoint, bad input data).
"""

from __future__ import annotations

import argparse
import os
import sys

from .ais import (
    TrackFormatError,
    extract_events,
    fit_lognormal,
    histogram_report,
    load_tracks,
    write_events,
    write_histogram,
)
from .config import (
    ConfigError,
    RunConfig,
    parse_run_config,
    resolved_snapshot,
    write_fit_file,
    write_kv,
)
from .ddpg import CheckpointError, DdpgAgent, load_checkpoint, save_checkpoint, train
from .env import RiverEnv, write_trace
from .scenarios import (
    SCENARIO_KINDS,
    default_scenario,
    metrics_summary,
    parse_scenario_file,
    run_scenario,
    write_profile,
    write_vessel_traces,
)
from .seeding import seed_streams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_BUILTIN_SCENARIOS = ("ar_replay", "sinusoidal", "river_profile", "platoon")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for
    # runtime failures, so route usage problems through exit code 1
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="riverfollow",
                     description="Vessel-following agent: training, "
                                 "evaluation, headway calibration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent from scratch")
    p_train.add_argument("--config", help="key-value config file")
    p_train.add_argument("--seed", type=int, help="override run.seed")
    p_train.add_argument("--episodes", type=int, help="override run.episodes")
    p_train.add_argument("--out", required=True, help="output directory")

    p_eval = sub.add_parser("eval", help="run validation scenarios")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--scenario", action="append", required=True,
                        help=f"builtin name ({', '.join(_BUILTIN_SCENARIOS)}) "
                             "or scenario file; repeatable")
    p_eval.add_argument("--config", help="key-value config file")
    p_eval.add_argument("--seed", type=int, help="scenario seed for builtins")
    p_eval.add_argument("--out", required=True)

    p_cal = sub.add_parser("calibrate", help="fit the headway reward from tracks")
    p_cal.add_argument("tracks", help="AIS-style track CSV")
    p_cal.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="run a single scenario")
    p_sim.add_argument("--checkpoint", required=True)
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--config", help="key-value config file")
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--out", required=True)
    return parser


def cmd_train(config_path, seed, episodes, out_dir) -> int:
    try:
        rc = parse_run_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if seed is not None:
        rc.seed = seed
    if episodes is not None:
        rc.episodes = episodes
    try:
        os.makedirs(out_dir, exist_ok=True)
        write_kv(os.path.join(out_dir, "resolved_config.txt"),
                 resolved_snapshot(rc), header="resolved run configuration")
        streams = seed_streams(rc.seed)
        agent = DdpgAgent(rng=streams["init"], **rc.ddpg.agent_kwargs())
        env = RiverEnv(config=rc.env, params=rc.vessel)
        report = train(agent, env, rc.episodes, seed=rc.seed,
                       checkpoint_dir=out_dir,
                       checkpoint_every=rc.checkpoint_every)
        with open(os.path.join(out_dir, "metrics.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write("episode,reward,collisions\n")
            for i, (r, c) in enumerate(zip(report.episode_rewards,
                                           report.episode_collisions), start=1):
                fh.write(f"{i},{r!r},{c}\n")
        save_checkpoint(agent, os.path.join(out_dir, "agent.rflw"))
        _write_demo_episode(agent, rc, streams["scenario"],
                            os.path.join(out_dir, "episode_trace.csv"))
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _write_demo_episode(agent, rc, rng, path) -> None:
    """One deterministic greedy episode of the trained agent, as a trace CSV."""
    env = RiverEnv(config=rc.env, params=rc.vessel)
    obs = env.reset(rng=rng)
    rows = []
    done = False
    while not done:
        obs, _, done, info = env.step(agent.act(obs))
        rows.append(info)
    write_trace(path, rows)


def _resolve_scenario(spec: str, seed, rc: RunConfig):
    if spec in _BUILTIN_SCENARIOS:
        return spec, default_scenario(spec, seed=seed or 0, config=rc.env,
                                      params=rc.vessel)
    if spec in SCENARIO_KINDS:
        raise ValueError(f"scenario kind {spec!r} needs a scenario file "
                         "(no builtin default)")
    name = os.path.splitext(os.path.basename(spec))[0]
    return name, parse_scenario_file(spec, config=rc.env, params=rc.vessel)


def _run_and_write(agent, name, scenario, rc: RunConfig, out_dir) -> None:
    scenario_dir = os.path.join(out_dir, name)
    os.makedirs(scenario_dir, exist_ok=True)
    if scenario.profiles is not None:
        for i, profile in enumerate(scenario.profiles):
            write_profile(os.path.join(scenario_dir, f"profile_{i}.csv"), profile)
    result = run_scenario(agent, scenario, config=rc.env, params=rc.vessel)
    write_vessel_traces(scenario_dir, result)
    write_kv(os.path.join(scenario_dir, "metrics.txt"), metrics_summary(result),
             header=f"scenario {name}")
    status = "collision" if result.collision else "ok"
    gaps = ", ".join(f"{k}:{v:.1f} m" for k, v in sorted(result.min_gaps.items()))
    print(f"{name}: {status}, {result.steps_run} steps, min gaps {gaps}")


def cmd_eval(checkpoint, scenario_specs, out_dir, config_path=None,
             seed=None) -> int:
    try:
        rc = parse_run_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        agent = load_checkpoint(checkpoint)
        os.makedirs(out_dir, exist_ok=True)
        for spec in scenario_specs:
            name, scenario = _resolve_scenario(spec, seed, rc)
            _run_and_write(agent, name, scenario, rc, out_dir)
    except (CheckpointError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_calibrate(tracks_path, out_dir) -> int:
    try:
        tracks = load_tracks(tracks_path)
        events = extract_events(tracks)
        if not events:
            print(f"error: no vessel-following events in {tracks_path}",
                  file=sys.stderr)
            return EXIT_RUNTIME
        samples = [e.time_gap for e in events]
        fit = fit_lognormal(samples)
        os.makedirs(out_dir, exist_ok=True)
        write_events(os.path.join(out_dir, "events.csv"), events)
        write_fit_file(os.path.join(out_dir, "fit.txt"), fit.mu, fit.sigma,
                       fit.sample_count, tracks.speed_reference)
        write_histogram(os.path.join(out_dir, "histogram.csv"),
                        histogram_report(samples, bin_width=25.0))
        print(f"fit over {fit.sample_count} events: mu={fit.mu:.4f} "
              f"sigma={fit.sigma:.4f} ({tracks.speed_reference} speed)")
    except (TrackFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_simulate(checkpoint, scenario_spec, out_dir, config_path=None,
                 seed=None) -> int:
    return cmd_eval(checkpoint, [scenario_spec], out_dir,
                    config_path=config_path, seed=seed)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "train":
        return cmd_train(args.config, args.seed, args.episodes, args.out)
    if args.command == "eval":
        return cmd_eval(args.checkpoint, args.scenario, args.out,
                        config_path=args.config, seed=args.seed)
    if args.command == "calibrate":
        return cmd_calibrate(args.tracks, args.out)
    if args.command == "simulate":
        return cmd_simulate(args.checkpoint, args.scenario, args.out,
                            config_path=args.config, seed=args.seed)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
