import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riverfollow.ddpg import DdpgAgent
from riverfollow.dynamics import VesselParams
from riverfollow.env import ArProcess, EnvConfig
from riverfollow.scenarios import (
    ChannelWave,
    DEFAULT_JUMP_SCHEDULE,
    DegenerateOscillationError,
    ProfileRangeError,
    RiverProfile,
    Scenario,
    SinusoidalRiverSpec,
    default_scenario,
    load_replay,
    load_schedule,
    metrics_summary,
    parse_scenario_file,
    piecewise_schedule,
    run_scenario,
    sinusoidal_river,
    smooth_leader_speed,
    string_stability_ratio,
    synthetic_profile,
    write_profile,
    write_vessel_traces,
)

CFG = EnvConfig()
PARAMS = VesselParams()


class FixedAgent:
    """Test double: constant power fraction regardless of observation."""

    def __init__(self, action=0.5):
        self.action = action

    def act(self, obs, explore=False, rng=None):
        return self.action


def small_profile(x0=-5000.0, x1=30000.0):
    return synthetic_profile((x0, x1), seed=1)


class TestRiverProfile:
    def test_exact_at_samples_linear_between(self):
        profile = RiverProfile(positions=[0.0, 100.0, 200.0],
                               depth=[6.0, 8.0, 7.0],
                               cross_section=[1500.0, 1700.0, 1600.0],
                               stream=[0.0, 1.0, 0.5])
        assert profile.sample(100.0) == (8.0, 1700.0, 1.0)
        # hand-computed midpoint of the first segment
        assert profile.sample(50.0) == (7.0, 1600.0, 0.5)
        assert profile.sample(150.0) == (7.5, 1650.0, 0.75)

    def test_out_of_range(self):
        profile = small_profile()
        with pytest.raises(ProfileRangeError):
            profile.sample(profile.positions[-1] + 1.0)
        with pytest.raises(ProfileRangeError):
            profile.sample(profile.positions[0] - 1.0)

    def test_conditions_subtract_draft(self):
        profile = RiverProfile(positions=[0.0, 100.0], depth=[6.0, 6.0],
                               cross_section=[1500.0, 1500.0],
                               stream=[0.0, 0.0])
        cond = profile.conditions(50.0, draft=2.8)
        assert cond.depth_below_keel == pytest.approx(6.0 - 2.8)

    def test_csv_round_trip(self, tmp_path):
        profile = small_profile()
        path = tmp_path / "river.csv"
        write_profile(path, profile)
        loaded = RiverProfile.from_csv(path)
        assert np.array_equal(loaded.positions, profile.positions)
        assert np.array_equal(loaded.depth, profile.depth)
        assert np.array_equal(loaded.cross_section, profile.cross_section)
        assert np.array_equal(loaded.stream, profile.stream)

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            RiverProfile(positions=[0.0, 0.0], depth=[5.0, 5.0],
                         cross_section=[1000.0, 1000.0], stream=[0.0, 0.0])


class TestSinusoidalRiver:
    def test_zero_amplitude_constant_at_means(self):
        spec = SinusoidalRiverSpec(
            depth=ChannelWave(5.347, 0.0, 1000.0),
            cross_section=ChannelWave(1664.0, 0.0, 1000.0),
            stream=ChannelWave(0.0, 0.0, 1000.0))
        for x in (0.0, 123.0, 999.0):
            cond = sinusoidal_river(0.0, x, spec)
            assert cond.depth_below_keel == 5.347
            assert cond.cross_section == 1664.0
            assert cond.stream_speed == 0.0

    def test_quarter_period_peak(self):
        spec = SinusoidalRiverSpec(
            depth=ChannelWave(5.347, 2.0, 1000.0),
            cross_section=ChannelWave(1664.0, 0.0, 1000.0),
            stream=ChannelWave(0.0, 0.0, 1000.0))
        cond = sinusoidal_river(0.0, 250.0, spec)
        assert cond.depth_below_keel == pytest.approx(7.347)

    @given(st.floats(min_value=-50000, max_value=50000))
    @settings(max_examples=60, deadline=None)
    def test_channels_stay_in_envelope(self, x):
        spec = SinusoidalRiverSpec.default(CFG, np.random.default_rng(0))
        cond = sinusoidal_river(0.0, x, spec)
        assert (spec.depth.mean - spec.depth.amplitude - 1e-9
                <= cond.depth_below_keel
                <= spec.depth.mean + spec.depth.amplitude + 1e-9)
        assert (spec.cross_section.mean - spec.cross_section.amplitude - 1e-9
                <= cond.cross_section
                <= spec.cross_section.mean + spec.cross_section.amplitude + 1e-9)

    def test_amplitude_envelope_enforced(self):
        with pytest.raises(ValueError):
            ChannelWave(mean=5.0, amplitude=2.6, period=100.0)
        # zero-mean channel admits only zero amplitude
        with pytest.raises(ValueError):
            ChannelWave(mean=0.0, amplitude=0.1, period=100.0)

    def test_default_means_are_stationary_means(self):
        spec = SinusoidalRiverSpec.default(CFG, np.random.default_rng(0))
        assert spec.depth.mean == pytest.approx(
            ArProcess(*CFG.ar_depth).stationary_mean())
        assert spec.cross_section.mean == pytest.approx(
            ArProcess(*CFG.ar_cross).stationary_mean())


class TestSchedules:
    def test_piecewise_values(self):
        schedule = piecewise_schedule(DEFAULT_JUMP_SCHEDULE)
        assert schedule(0.0) == 1.0
        assert schedule(699.9) == 1.0
        assert schedule(700.0) == 0.2
        assert schedule(2100.0) == 0.05
        assert schedule(99999.0) == 0.05

    def test_rejects_out_of_range_fraction(self):
        with pytest.raises(ValueError):
            piecewise_schedule(((0.0, 1.5),))

    def test_schedule_csv(self, tmp_path):
        path = tmp_path / "sched.csv"
        path.write_text("t_s,power_fraction\n0,1.0\n700,0.2\n")
        schedule = load_schedule(path)
        assert schedule(100.0) == 1.0
        assert schedule(800.0) == 0.2

    def test_replay_csv(self, tmp_path):
        path = tmp_path / "replay.csv"
        path.write_text("t_s,x_m,v_mps\n0,0,4\n10,40,4\n20,80,4\n")
        times, xs, vs = load_replay(path)
        assert list(times) == [0.0, 10.0, 20.0]
        bad = tmp_path / "bad.csv"
        bad.write_text("t_s,x_m,v_mps\n0,0,4\n0,40,4\n")
        with pytest.raises(ValueError):
            load_replay(bad)


class TestStringStability:
    def _trace(self, v):
        t = np.arange(len(v), dtype=float)
        return {"t": t, "v": np.asarray(v, dtype=float)}

    def test_identical_traces_ratio_one(self):
        v = 4.0 + np.sin(np.linspace(0, 20, 1200))
        traces = [self._trace(v), self._trace(v), self._trace(v)]
        assert string_stability_ratio(traces) == pytest.approx(1.0)

    def test_flat_last_follower_ratio_zero(self):
        v1 = 4.0 + np.sin(np.linspace(0, 20, 1200))
        v2 = np.full(1200, 4.0)
        assert string_stability_ratio([self._trace(v1), self._trace(v2)]) == 0.0

    def test_requires_two_followers(self):
        with pytest.raises(ValueError):
            string_stability_ratio([self._trace(np.ones(1200))])

    def test_degenerate_first_follower(self):
        flat = self._trace(np.full(1200, 4.0))
        osc = self._trace(4.0 + np.sin(np.linspace(0, 20, 1200)))
        with pytest.raises(DegenerateOscillationError):
            string_stability_ratio([flat, osc])


class TestRunScenario:
    def test_deterministic_repeat(self):
        agent = DdpgAgent(rng=np.random.default_rng(0))
        scenario = default_scenario("sinusoidal", seed=5)
        scenario.duration = 300
        a = run_scenario(agent, scenario)
        b = run_scenario(agent, scenario)
        for tr_a, tr_b in zip(a.traces, b.traces):
            for col in tr_a:
                assert np.array_equal(tr_a[col], tr_b[col], equal_nan=True)
        assert a.min_gaps == b.min_gaps

    def test_platoon_of_one_matches_first_follower_of_five(self):
        agent = DdpgAgent(rng=np.random.default_rng(1))
        profile = small_profile()
        common = dict(kind="platoon", duration=400, seed=9,
                      power_schedule=DEFAULT_JUMP_SCHEDULE,
                      profiles=(profile,), initial_follower_speed=4.0)
        solo = run_scenario(agent, Scenario(followers=1, **common))
        five = run_scenario(agent, Scenario(followers=5, **common))
        for col in ("x", "v", "P", "gap"):
            assert np.array_equal(solo.traces[1][col], five.traces[1][col])

    def test_collision_flag_matches_traces(self):
        # aggressive follower starting close behind a slow leader
        agent = FixedAgent(action=1.0)
        scenario = Scenario(kind="sinusoidal", duration=600, seed=2,
                            initial_gap=40.0, initial_follower_speed=6.0,
                            leader_speed_fn=lambda t: 2.0)
        result = run_scenario(agent, scenario)
        assert result.collision
        assert result.min_gaps[1] <= 0.0
        assert result.steps_run < 600
        assert result.traces[1]["gap"][-1] <= 0.0

    def test_no_collision_flag_consistency(self):
        agent = FixedAgent(action=0.3)
        scenario = Scenario(kind="sinusoidal", duration=300, seed=2,
                            initial_gap=600.0, initial_follower_speed=3.0,
                            leader_speed_fn=lambda t: 3.0)
        result = run_scenario(agent, scenario)
        assert not result.collision
        assert result.min_gaps[1] > 0.0
        assert result.steps_run == 300

    def test_ar_replay_runs(self):
        agent = FixedAgent(action=0.4)
        scenario = default_scenario("ar_replay", seed=3)
        scenario.duration = 200
        result = run_scenario(agent, scenario)
        assert result.steps_run <= 200
        assert len(result.traces) == 2
        # AR river varies step to step
        assert np.std(result.traces[1]["h"]) > 0.0

    def test_powered_leader_constant_power(self):
        agent = FixedAgent(action=0.5)
        profile = small_profile()
        scenario = Scenario(kind="river_profile", duration=200, seed=4,
                            leader_power=0.5e6, profiles=(profile,),
                            initial_follower_speed=4.0)
        result = run_scenario(agent, scenario)
        leader_power = result.traces[0]["P"]
        assert np.all(leader_power == 0.5e6)

    def test_per_vessel_profiles(self):
        agent = FixedAgent(action=0.4)
        profiles = (small_profile(), synthetic_profile((-5000.0, 30000.0), seed=99))
        scenario = Scenario(kind="river_profile", duration=150, seed=4,
                            profiles=profiles, initial_follower_speed=4.0)
        result = run_scenario(agent, scenario)
        # the two vessels see different rivers at the same time step
        assert not np.allclose(result.traces[0]["h"], result.traces[1]["h"])

    def test_leader_replay(self, tmp_path):
        path = tmp_path / "replay.csv"
        rows = ["t_s,x_m,v_mps"]
        for t in range(0, 301, 10):
            rows.append(f"{t},{4.0 * t},4.0")
        path.write_text("\n".join(rows) + "\n")
        agent = FixedAgent(action=0.4)
        scenario = Scenario(kind="leader_replay", duration=250, seed=1,
                            replay_path=str(path), initial_follower_speed=4.0)
        result = run_scenario(agent, scenario)
        assert result.steps_run == 250
        v = result.traces[0]["v"]
        assert np.allclose(v, 4.0)

    def test_replay_too_short_rejected(self, tmp_path):
        path = tmp_path / "replay.csv"
        path.write_text("t_s,x_m,v_mps\n0,0,4\n50,200,4\n")
        scenario = Scenario(kind="leader_replay", duration=250, seed=1,
                            replay_path=str(path))
        with pytest.raises(ValueError):
            run_scenario(FixedAgent(), scenario)

    def test_profile_out_of_range_propagates(self):
        profile = synthetic_profile((-2000.0, 1500.0), seed=1)
        scenario = Scenario(kind="river_profile", duration=2000, seed=4,
                            profiles=(profile,), initial_follower_speed=4.0)
        with pytest.raises(ProfileRangeError):
            run_scenario(FixedAgent(action=0.8), scenario)

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            Scenario(kind="warp_drive").validate()
        with pytest.raises(ValueError):
            Scenario(kind="platoon", power_schedule=None).validate()
        with pytest.raises(ValueError):
            Scenario(kind="sinusoidal", followers=0).validate()
        with pytest.raises(ValueError):
            Scenario(kind="leader_replay").validate()


class TestMetrics:
    def _result(self):
        agent = FixedAgent(action=0.4)
        scenario = Scenario(kind="sinusoidal", duration=700, seed=6,
                            followers=2, initial_gap=500.0,
                            initial_follower_speed=3.5,
                            leader_speed_fn=smooth_leader_speed())
        return run_scenario(agent, scenario)

    def test_summary_keys(self):
        summary = metrics_summary(self._result())
        for key in ("collision", "steps_run", "min_gap_1", "min_gap_2",
                    "comfort_rms_1", "comfort_rms_steady_2",
                    "tracking_error_1", "string_stability_ratio"):
            assert key in summary

    def test_trace_files(self, tmp_path):
        result = self._result()
        paths = write_vessel_traces(tmp_path, result)
        assert len(paths) == 3
        header = open(paths[0]).readline().strip()
        assert header == "t,x,v,P,gap,T,h,A_cross,v_str"

    def test_fixed_power_comfort_is_zero(self):
        result = self._result()
        # constant action -> no power changes after the first step
        assert result.comfort_rms_steady[1] == pytest.approx(0.0, abs=1e-15)


class TestScenarioFile:
    def test_parse_round_trip(self, tmp_path):
        sched = tmp_path / "sched.csv"
        sched.write_text("t_s,power_fraction\n0,1.0\n700,0.1\n")
        profile_path = tmp_path / "river.csv"
        write_profile(profile_path, small_profile())
        spec = tmp_path / "scen.txt"
        spec.write_text(
            "kind = platoon\n"
            "duration = 900\n"
            "followers = 3\n"
            "seed = 12\n"
            "initial_gap = 450\n"
            f"leader.schedule = {sched}\n"
            f"river.profile = {profile_path}\n")
        scenario = parse_scenario_file(spec)
        assert scenario.kind == "platoon"
        assert scenario.duration == 900
        assert scenario.followers == 3
        assert scenario.initial_gap == 450.0
        assert scenario.power_schedule == ((0.0, 1.0), (700.0, 0.1))
        assert scenario.profile_paths == (str(profile_path),)
        run_scenario(FixedAgent(0.4), scenario)  # executable end to end

    def test_unknown_key_rejected(self, tmp_path):
        spec = tmp_path / "scen.txt"
        spec.write_text("kind = sinusoidal\nwarp = 9\n")
        with pytest.raises(ValueError, match="unknown"):
            parse_scenario_file(spec)

    def test_missing_kind(self, tmp_path):
        spec = tmp_path / "scen.txt"
        spec.write_text("duration = 100\n")
        with pytest.raises(ValueError, match="kind"):
            parse_scenario_file(spec)

    def test_builtin_names(self):
        for name in ("ar_replay", "sinusoidal", "river_profile", "platoon"):
            scenario = default_scenario(name, seed=1)
            scenario.validate()
        with pytest.raises(ValueError):
            default_scenario("unknown")
