import os

import numpy as np
import pytest

from riverfollow.cli import main
from riverfollow.config import (
    ConfigError,
    RunConfig,
    parse_run_config,
    read_kv,
    resolved_snapshot,
    write_fit_file,
    write_kv,
)
from riverfollow.ddpg import DdpgAgent, save_checkpoint
from riverfollow.seeding import STREAM_NAMES, seed_streams


class TestDefaults:
    def test_agent_hyperparameters(self):
        rc = RunConfig()
        assert rc.ddpg.gamma == 0.95
        assert rc.ddpg.batch_size == 32
        assert rc.ddpg.buffer_capacity == 100_000
        assert rc.ddpg.lr_actor == 0.001
        assert rc.ddpg.lr_critic == 0.001
        assert rc.ddpg.tau == 0.001
        assert rc.ddpg.ou_theta == 0.15
        assert rc.ddpg.ou_sigma == 0.2
        assert rc.ddpg.hidden_size == 32

    def test_environment_parameters(self):
        env = RunConfig().env
        assert env.v_scale == 6.0
        assert env.g_scale == 800.0
        assert env.h_scale == 3.0
        assert env.a_scale == 1500.0
        assert env.dt == 1.0
        assert env.mu_t == 5.41
        assert env.sigma_t == 1.06
        assert env.beta == 0.0004
        assert env.ar_leader == (0.010, 0.994, 0.034)
        assert env.ar_depth == (0.262, 0.951, 0.381)
        assert env.ar_cross == (4.992, 0.997, 598.0)
        assert env.ar_stream == (0.0, 0.993, 0.030)
        assert env.min_rel_speed == 2.0
        assert env.initial_gap == 600.0
        assert env.episode_len == 500

    def test_vessel_parameters(self):
        vessel = RunConfig().vessel
        assert vessel.mass == 3.174e6
        assert vessel.length == 110.0
        assert vessel.beam == 11.4
        assert vessel.draft == 2.8
        assert vessel.max_power == 1.0e6


class TestParsing:
    def test_missing_file_is_pure_defaults(self):
        assert parse_run_config(None) == RunConfig()

    def test_override(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("env.mu_t = 5.0\nddpg.gamma = 0.9\nrun.seed = 7\n"
                        "vessel.max_power = 2e6\nenv.ar_depth_phi = 0.9\n")
        rc = parse_run_config(path)
        assert rc.env.mu_t == 5.0
        assert rc.ddpg.gamma == 0.9
        assert rc.seed == 7
        assert rc.vessel.max_power == 2e6
        assert rc.env.ar_depth == (0.262, 0.9, 0.381)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("env.muu_t = 5.0\n")
        with pytest.raises(ConfigError, match="unknown"):
            parse_run_config(path)

    def test_bad_value_reported(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("env.mu_t = soon\n")
        with pytest.raises(ConfigError, match="mu_t"):
            parse_run_config(path)

    def test_bad_line_reported(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("env.mu_t 5.0\n")
        with pytest.raises(ConfigError, match="line 1"):
            parse_run_config(path)

    def test_comments_and_blanks(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("# full defaults\n\nenv.mu_t = 5.2  # override\n")
        assert parse_run_config(path).env.mu_t == 5.2

    def test_snapshot_round_trip(self, tmp_path):
        original = parse_run_config(None)
        path = tmp_path / "resolved.txt"
        write_kv(path, resolved_snapshot(original))
        assert parse_run_config(path) == original

    def test_snapshot_round_trip_with_overrides(self, tmp_path):
        src = tmp_path / "run.txt"
        src.write_text("env.sigma_t = 0.9\nddpg.batch_size = 64\nrun.episodes = 5\n")
        rc = parse_run_config(src)
        path = tmp_path / "resolved.txt"
        write_kv(path, resolved_snapshot(rc))
        assert parse_run_config(path) == rc

    def test_fit_file_is_valid_config(self, tmp_path):
        path = tmp_path / "fit.txt"
        write_fit_file(path, mu=5.33, sigma=1.01, sample_count=812,
                       speed_reference="ground")
        rc = parse_run_config(path)
        assert rc.env.mu_t == 5.33
        assert rc.env.sigma_t == 1.01
        assert rc.calibration_sample_count == 812
        assert rc.calibration_speed_reference == "ground"


class TestSeeding:
    def test_streams_named_and_independent(self):
        streams = seed_streams(123)
        assert set(streams) == set(STREAM_NAMES)
        draws = {name: streams[name].standard_normal(4).tolist()
                 for name in STREAM_NAMES}
        values = [tuple(v) for v in draws.values()]
        assert len(set(values)) == len(values)

    def test_reproducible(self):
        a = seed_streams(5)["env"].standard_normal(8)
        b = seed_streams(5)["env"].standard_normal(8)
        assert np.array_equal(a, b)


def write_synthetic_tracks(path, n=400, seed=0):
    rng = np.random.default_rng(seed)
    rows = ["vessel_id,timestamp_s,x_m,y_m,speed_mps,length_m,beam_m"]
    x_f, x_l = 0.0, 500.0
    for i in range(n):
        t = 10.0 * i
        v = 4.0 + 0.05 * np.sin(i / 20.0)
        rows.append(f"L,{t},{x_l:.2f},0.0,{v:.4f},100,10")
        rows.append(f"F,{t},{x_f:.2f},0.0,{v + rng.uniform(-0.05, 0.05):.4f},100,10")
        x_l += v * 10.0
        x_f += v * 10.0
    path.write_text("\n".join(rows) + "\n")


class TestCliTrain:
    def test_zero_episodes(self, tmp_path):
        out = tmp_path / "run"
        code = main(["train", "--episodes", "0", "--out", str(out)])
        assert code == 0
        assert (out / "metrics.csv").read_text() == "episode,reward,collisions\n"
        snapshot = read_kv(out / "resolved_config.txt")
        assert snapshot["ddpg.gamma"] == "0.95"
        assert snapshot["env.mu_t"] == "5.41"
        assert snapshot["env.ar_cross_sigma2"] == "598.0"
        assert (out / "agent.rflw").exists()

    def test_determinism_byte_identical_metrics(self, tmp_path):
        cfg = tmp_path / "small.txt"
        cfg.write_text("env.episode_len = 40\nrun.seed = 11\nrun.episodes = 2\n")
        code_a = main(["train", "--config", str(cfg), "--out",
                       str(tmp_path / "a")])
        code_b = main(["train", "--config", str(cfg), "--out",
                       str(tmp_path / "b")])
        assert code_a == code_b == 0
        for name in ("metrics.csv", "episode_trace.csv"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b

    def test_episode_trace_artifact(self, tmp_path):
        from riverfollow.env import TRACE_COLUMNS

        out = tmp_path / "run"
        assert main(["train", "--episodes", "0", "--out", str(out)]) == 0
        lines = (out / "episode_trace.csv").read_text().splitlines()
        assert lines[0] == ",".join(TRACE_COLUMNS)
        assert len(lines) == 501  # one full episode

    def test_bad_config_exit_one(self, tmp_path):
        cfg = tmp_path / "bad.txt"
        cfg.write_text("nope = 1\n")
        assert main(["train", "--config", str(cfg),
                     "--out", str(tmp_path / "x")]) == 1

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("run.seed = 1\nrun.episodes = 99\nenv.episode_len = 10\n")
        out = tmp_path / "run"
        assert main(["train", "--config", str(cfg), "--episodes", "1",
                     "--seed", "5", "--out", str(out)]) == 0
        snapshot = read_kv(out / "resolved_config.txt")
        assert snapshot["run.episodes"] == "1"
        assert snapshot["run.seed"] == "5"

    def test_fit_feeds_training_snapshot(self, tmp_path):
        fit = tmp_path / "fit.txt"
        write_fit_file(fit, mu=5.2, sigma=0.98, sample_count=100,
                       speed_reference="ground")
        out = tmp_path / "run"
        assert main(["train", "--config", str(fit), "--episodes", "0",
                     "--out", str(out)]) == 0
        snapshot = read_kv(out / "resolved_config.txt")
        assert snapshot["env.mu_t"] == "5.2"


class TestCliEval:
    def _checkpoint(self, tmp_path):
        agent = DdpgAgent(rng=np.random.default_rng(0))
        path = tmp_path / "agent.rflw"
        save_checkpoint(agent, path)
        return str(path)

    def test_corrupt_checkpoint_exit_two(self, tmp_path):
        bad = tmp_path / "bad.rflw"
        bad.write_bytes(b"NOPE" + bytes(64))
        assert main(["eval", "--checkpoint", str(bad), "--scenario",
                     "sinusoidal", "--out", str(tmp_path / "out")]) == 2

    def test_multiple_scenarios_emit_summaries(self, tmp_path):
        ckpt = self._checkpoint(tmp_path)
        scen = tmp_path / "short.txt"
        scen.write_text("kind = sinusoidal\nduration = 50\nseed = 1\n")
        out = tmp_path / "out"
        specs = []
        for name in ("s1", "s2", "s3", "s4"):
            p = tmp_path / f"{name}.txt"
            p.write_text(f"kind = sinusoidal\nduration = 40\nseed = {len(specs)}\n")
            specs += ["--scenario", str(p)]
        assert main(["eval", "--checkpoint", ckpt, *specs,
                     "--out", str(out)]) == 0
        summaries = [p for p in out.rglob("metrics.txt")]
        assert len(summaries) == 4

    def test_platoon_emits_six_trace_files(self, tmp_path):
        ckpt = self._checkpoint(tmp_path)
        scen = tmp_path / "platoon.txt"
        scen.write_text("kind = platoon\nduration = 60\nseed = 2\n"
                        "initial_speed = 4.0\n")
        out = tmp_path / "out"
        assert main(["simulate", "--checkpoint", ckpt, "--scenario", str(scen),
                     "--out", str(out)]) == 0
        traces = sorted((out / "platoon").glob("vessel_*.csv"))
        assert len(traces) == 6
        assert (out / "platoon" / "metrics.txt").exists()
        # generated profile written for provenance
        assert (out / "platoon" / "profile_0.csv").exists()

    def test_builtin_scenario_by_name(self, tmp_path):
        ckpt = self._checkpoint(tmp_path)
        scen_out = tmp_path / "out"
        code = main(["eval", "--checkpoint", ckpt, "--scenario", "ar_replay",
                     "--seed", "3", "--out", str(scen_out)])
        assert code == 0
        assert (scen_out / "ar_replay" / "vessel_0.csv").exists()


class TestCliCalibrate:
    def test_synthetic_corpus(self, tmp_path):
        tracks = tmp_path / "tracks.csv"
        write_synthetic_tracks(tracks)
        out = tmp_path / "cal"
        assert main(["calibrate", str(tracks), "--out", str(out)]) == 0
        fit = read_kv(out / "fit.txt")
        assert "env.mu_t" in fit and "env.sigma_t" in fit
        assert fit["calibration.speed_reference"] == "ground"
        assert (out / "events.csv").exists()
        assert (out / "histogram.csv").exists()

    def test_empty_tracks_exit_two(self, tmp_path):
        tracks = tmp_path / "tracks.csv"
        tracks.write_text("vessel_id,timestamp_s,x_m,y_m,speed_mps,length_m,beam_m\n")
        assert main(["calibrate", str(tracks), "--out", str(tmp_path / "o")]) == 2

    def test_fit_round_trip_into_train(self, tmp_path):
        tracks = tmp_path / "tracks.csv"
        write_synthetic_tracks(tracks)
        out = tmp_path / "cal"
        main(["calibrate", str(tracks), "--out", str(out)])
        run_out = tmp_path / "run"
        assert main(["train", "--config", str(out / "fit.txt"),
                     "--episodes", "0", "--out", str(run_out)]) == 0
        fit = read_kv(out / "fit.txt")
        snapshot = read_kv(run_out / "resolved_config.txt")
        assert snapshot["env.mu_t"] == fit["env.mu_t"]


class TestCliUsage:
    def test_missing_subcommand(self):
        assert main([]) == 1

    def test_unknown_flag(self):
        assert main(["train", "--frobnicate", "--out", "x"]) == 1

    def test_missing_required_flag(self):
        assert main(["eval", "--scenario", "sinusoidal"]) == 1
