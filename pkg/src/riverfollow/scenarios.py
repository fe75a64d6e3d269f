"""Scenario harness for validating trained agents.

Five scenario kinds cover the validation matrix: replay of the training
AR(1) world, an artificial sinusoidal river with a smooth leader, a
file-based river profile with a constant-power dynamic leader, a platoon
of followers behind a jump-power leader, and replay of a recorded leader
trajectory.  Followers are always driven by the deterministic actor (no
exploration noise).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dynamics import RiverConditions, VesselParams, VesselState, net_acceleration
from .dynamics import step as integrate
from .env import (
    ArProcess,
    EnvConfig,
    INITIAL_SPEED_RANGE,
    Observation,
    advance_river_processes,
    observe,
    time_gap,
)

SCENARIO_KINDS = ("ar_replay", "sinusoidal", "river_profile", "platoon",
                  "leader_replay")

#: default platoon leader schedule: power fractions held 700 s each,
#: with the near-zero drop as the safety-critical event
DEFAULT_JUMP_SCHEDULE = ((0.0, 1.0), (700.0, 0.2), (1400.0, 0.8), (2100.0, 0.05))

PROFILE_COLUMNS = ("x_m", "depth_m", "cross_section_m2", "stream_mps")
SCHEDULE_COLUMNS = ("t_s", "power_fraction")
REPLAY_COLUMNS = ("t_s", "x_m", "v_mps")

VESSEL_TRACE_COLUMNS = ("t", "x", "v", "P", "gap", "T", "h", "A_cross", "v_str")


class ProfileRangeError(ValueError):
    """A vessel left the position span covered by its river profile."""


class DegenerateOscillationError(ValueError):
    """First follower barely oscillates; the stability ratio is undefined."""


# ---------------------------------------------------------------------------
# river providers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelWave:
    """One sinusoidal river channel: mean + amplitude*sin(2*pi*x/period + phase)."""

    mean: float
    amplitude: float
    period: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0 or self.amplitude > 0.5 * self.mean:
            raise ValueError(
                f"amplitude {self.amplitude} outside [0, {0.5 * self.mean}] "
                f"(half the channel mean)")
        if self.period <= 0:
            raise ValueError("period must be positive")

    def value(self, x: float) -> float:
        return self.mean + self.amplitude * math.sin(
            2.0 * math.pi * x / self.period + self.phase)


@dataclass(frozen=True)
class SinusoidalRiverSpec:
    """Position-dependent river built from one wave per channel.

    Channel means anchor at the stationary means of the training AR
    processes, so the scenario stays inside the training distribution
    while varying smoothly in space.
    """

    depth: ChannelWave
    cross_section: ChannelWave
    stream: ChannelWave

    @classmethod
    def default(cls, config: EnvConfig | None = None,
                rng: np.random.Generator | None = None) -> "SinusoidalRiverSpec":
        config = config or EnvConfig()
        if rng is None:
            rng = np.random.default_rng()
        depth_mean = ArProcess(*config.ar_depth).stationary_mean()
        cross_mean = ArProcess(*config.ar_cross).stationary_mean()
        phases = rng.uniform(0.0, 2.0 * math.pi, size=2)
        # stream mean is 0, which forces a zero amplitude under the
        # half-mean envelope: the stream stays flat in this scenario kind
        return cls(
            depth=ChannelWave(depth_mean, 1.5, 4000.0, phases[0]),
            cross_section=ChannelWave(cross_mean, 350.0, 6500.0, phases[1]),
            stream=ChannelWave(0.0, 0.0, 5000.0),
        )


def sinusoidal_river(t: float, position: float,
                     spec: SinusoidalRiverSpec) -> RiverConditions:
    """River conditions of the artificial sinusoidal scenario at a position."""
    return RiverConditions(
        depth_below_keel=spec.depth.value(position),
        cross_section=spec.cross_section.value(position),
        stream_speed=spec.stream.value(position),
    )


@dataclass
class RiverProfile:
    """Sampled river columns over longitudinal position.

    ``depth`` is the water depth; the keel clearance handed to the
    dynamics is depth minus the vessel draft.  Values interpolate
    linearly between samples; positions outside the span raise
    ProfileRangeError.
    """

    positions: np.ndarray
    depth: np.ndarray
    cross_section: np.ndarray
    stream: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.depth = np.asarray(self.depth, dtype=float)
        self.cross_section = np.asarray(self.cross_section, dtype=float)
        self.stream = np.asarray(self.stream, dtype=float)
        if self.positions.size < 2:
            raise ValueError("profile needs at least two samples")
        if np.any(np.diff(self.positions) <= 0):
            raise ValueError("profile positions must be strictly increasing")

    @classmethod
    def from_csv(cls, path) -> "RiverProfile":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if tuple(header) != PROFILE_COLUMNS:
                raise ValueError(
                    f"{path}: expected header {','.join(PROFILE_COLUMNS)}")
            for row in reader:
                if row:
                    rows.append([float(v) for v in row])
        data = np.array(rows, dtype=float)
        return cls(positions=data[:, 0], depth=data[:, 1],
                   cross_section=data[:, 2], stream=data[:, 3])

    def sample(self, x: float) -> tuple[float, float, float]:
        """(water depth, cross-section, stream speed) at position x."""
        if x < self.positions[0] or x > self.positions[-1]:
            raise ProfileRangeError(
                f"position {x:.1f} m outside profile span "
                f"[{self.positions[0]:.1f}, {self.positions[-1]:.1f}]")
        return (float(np.interp(x, self.positions, self.depth)),
                float(np.interp(x, self.positions, self.cross_section)),
                float(np.interp(x, self.positions, self.stream)))

    def conditions(self, x: float, draft: float) -> RiverConditions:
        depth, cross, stream = self.sample(x)
        return RiverConditions(depth_below_keel=depth - draft,
                               cross_section=cross, stream_speed=stream)


def write_profile(path, profile: RiverProfile) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(PROFILE_COLUMNS) + "\n")
        for x, d, a, s in zip(profile.positions, profile.depth,
                              profile.cross_section, profile.stream):
            fh.write(f"{float(x)!r},{float(d)!r},{float(a)!r},{float(s)!r}\n")


def synthetic_profile(span: tuple[float, float], config: EnvConfig | None = None,
                      params: VesselParams | None = None,
                      seed: int = 0, spacing: float = 100.0) -> RiverProfile:
    """Generate a smooth synthetic river profile over a position span.

    Channels wander around the AR stationary means with long-wavelength
    sinusoids whose swing stays inside the training distribution; the
    stream varies within roughly one stationary standard deviation.
    """
    config = config or EnvConfig()
    params = params or VesselParams()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x = np.arange(span[0], span[1] + spacing, spacing)

    def wander(mean, amp1, period1, amp2, period2):
        p1, p2 = rng.uniform(0.0, 2.0 * math.pi, size=2)
        return (mean
                + amp1 * np.sin(2.0 * math.pi * x / period1 + p1)
                + amp2 * np.sin(2.0 * math.pi * x / period2 + p2))

    below_keel = wander(ArProcess(*config.ar_depth).stationary_mean(),
                        1.2, 5200.0, 0.6, 1700.0)
    cross = wander(ArProcess(*config.ar_cross).stationary_mean(),
                   260.0, 7900.0, 110.0, 2600.0)
    stream = wander(0.0, 0.8, 6100.0, 0.3, 2300.0)
    below_keel = np.maximum(below_keel, 0.5)
    cross = np.maximum(cross, 4.0 * params.submerged_area)
    return RiverProfile(positions=x, depth=below_keel + params.draft,
                        cross_section=cross, stream=stream)


class _StaticRiver:
    """Provider facade over a time-invariant river (sinusoid or profile)."""

    def __init__(self, conditions_fn: Callable[[float, float, float], RiverConditions]):
        self._fn = conditions_fn

    def advance(self, rng) -> None:
        pass

    def conditions(self, t: float, x: float, draft: float) -> RiverConditions:
        return self._fn(t, x, draft)


class _ArWorld:
    """Training-style AR river plus AR leader speed, advanced once per step."""

    def __init__(self, config: EnvConfig, params: VesselParams,
                 initial_leader_speed: float):
        self.config = config
        self.cross_floor = 2.0 * params.submerged_area
        self.proc_leader = ArProcess(*config.ar_leader, current=initial_leader_speed)
        self.proc_depth = ArProcess(*config.ar_depth)
        self.proc_depth.current = self.proc_depth.stationary_mean()
        self.proc_cross = ArProcess(*config.ar_cross)
        self.proc_cross.current = self.proc_cross.stationary_mean()
        self.proc_stream = ArProcess(*config.ar_stream)
        self.proc_stream.current = self.proc_stream.stationary_mean()
        self.leader_speed = initial_leader_speed

    def advance(self, rng) -> None:
        self.leader_speed = advance_river_processes(
            self.proc_leader, self.proc_depth, self.proc_cross,
            self.proc_stream, rng, self.config.min_rel_speed, self.cross_floor)

    def conditions(self, t: float, x: float, draft: float) -> RiverConditions:
        return RiverConditions(depth_below_keel=self.proc_depth.current,
                               cross_section=self.proc_cross.current,
                               stream_speed=self.proc_stream.current)


# ---------------------------------------------------------------------------
# leader drivers
# ---------------------------------------------------------------------------

class _TrajectoryLeader:
    """Leader whose speed comes from a function of time (or the AR world)."""

    def __init__(self, speed_fn: Callable[[float], float], position: float,
                 dt: float):
        self.speed_fn = speed_fn
        self.position = position
        self.speed = speed_fn(0.0)
        self.power = float("nan")
        self.dt = dt

    def advance(self, time: float) -> None:
        new_speed = self.speed_fn(time)
        self.position += 0.5 * (self.speed + new_speed) * self.dt
        self.speed = new_speed


class _ReplayLeader:
    """Leader replayed from a recorded (t, x, v) trajectory."""

    def __init__(self, times: np.ndarray, xs: np.ndarray, vs: np.ndarray,
                 duration: float):
        if times[-1] < duration:
            raise ValueError(
                f"replay trajectory covers {times[-1]:.0f} s, scenario needs "
                f"{duration:.0f} s")
        self.times = times
        self.xs = xs
        self.vs = vs
        self.position = float(xs[0])
        self.speed = float(vs[0])
        self.power = float("nan")

    def advance(self, time: float) -> None:
        self.position = float(np.interp(time, self.times, self.xs))
        self.speed = float(np.interp(time, self.times, self.vs))


class _PoweredLeader:
    """Dynamic leader vessel following a power schedule on its river."""

    def __init__(self, schedule: Callable[[float], float], river,
                 state: VesselState, params: VesselParams, dt: float):
        self.schedule = schedule
        self.river = river
        self.state = state
        self.params = params
        self.dt = dt

    @property
    def position(self) -> float:
        return self.state.position

    @property
    def speed(self) -> float:
        return self.state.speed

    @property
    def power(self) -> float:
        return self.state.power

    def advance(self, time: float) -> None:
        self.state.power = self.schedule(time) * self.params.max_power
        river = self.river.conditions(time, self.state.position, self.params.draft)
        accel = net_acceleration(self.state, river, self.params)
        new = integrate(self.state, accel, self.dt)
        if new.speed < 0.0:
            new.position = self.state.position + 0.5 * self.state.speed * self.dt
            new.speed = 0.0
        self.state = new


def piecewise_schedule(points) -> Callable[[float], float]:
    """Piecewise-constant power fractions: value of the last point <= t."""
    points = sorted(points)
    times = np.array([p[0] for p in points], dtype=float)
    fractions = np.array([p[1] for p in points], dtype=float)
    if np.any((fractions < 0.0) | (fractions > 1.0)):
        raise ValueError("power fractions must lie in [0, 1]")

    def schedule(t: float) -> float:
        idx = int(np.searchsorted(times, t, side="right")) - 1
        return float(fractions[max(idx, 0)])

    return schedule


def load_schedule(path) -> Callable[[float], float]:
    """Read a leader power schedule CSV (t_s,power_fraction)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if tuple(header) != SCHEDULE_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(SCHEDULE_COLUMNS)}")
        points = [(float(r[0]), float(r[1])) for r in reader if r]
    if not points:
        raise ValueError(f"{path}: empty schedule")
    return piecewise_schedule(points)


def load_replay(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a leader replay CSV (t_s,x_m,v_mps)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if tuple(header) != REPLAY_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(REPLAY_COLUMNS)}")
        rows = [[float(v) for v in r] for r in reader if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two replay samples")
    data = np.array(rows, dtype=float)
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: replay times must be strictly increasing")
    return data[:, 0], data[:, 1], data[:, 2]


def smooth_leader_speed(base: float = 2.0, amplitude: float = 2.0,
                        period: float = 800.0, second_amplitude: float = 1.0,
                        second_period: float = 1900.0) -> Callable[[float], float]:
    """Smooth ground-speed trajectory starting at ``base`` m/s.

    Two raised-cosine components keep the speed >= base at all times and
    the acceleration gentle (no jumps, unlike the AR trajectories).
    """

    def speed(t: float) -> float:
        return (base
                + 0.5 * amplitude * (1.0 - math.cos(2.0 * math.pi * t / period))
                + 0.5 * second_amplitude
                * (1.0 - math.cos(2.0 * math.pi * t / second_period)))

    return speed


# ---------------------------------------------------------------------------
# scenario definition
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """One validation run: leader behaviour, river model, follower count."""

    kind: str
    duration: int = 2000
    followers: int = 1
    seed: int = 0
    initial_gap: float = 600.0
    initial_follower_speed: float | None = None
    transient_cutoff: float = 500.0
    # sinusoidal kind
    river_waves: SinusoidalRiverSpec | None = None
    leader_speed_fn: Callable[[float], float] | None = None
    # dynamic-leader kinds (river_profile, platoon)
    leader_power: float = 0.5e6
    power_schedule: tuple[tuple[float, float], ...] | None = None
    # profile river: one shared profile or one per vessel (leader first)
    profiles: tuple[RiverProfile, ...] | None = None
    profile_paths: tuple[str, ...] | None = None
    # leader_replay kind
    replay_path: str | None = None

    def validate(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.followers < 1:
            raise ValueError("follower count must be >= 1")
        if self.duration < 1:
            raise ValueError("duration must be >= 1 step")
        if self.kind == "platoon" and self.power_schedule is None:
            raise ValueError("platoon scenarios require a dynamic leader "
                             "(power schedule)")
        if self.kind == "leader_replay" and self.replay_path is None:
            raise ValueError("leader_replay scenarios need a trajectory file")


@dataclass
class ScenarioResult:
    """Traces and aggregate metrics of one scenario run.

    ``traces[0]`` is the leader; followers are 1-indexed in the metric
    dicts.  Steady metrics discard the transient window at the start.
    """

    traces: list[dict[str, np.ndarray]]
    min_gaps: dict[int, float]
    collision: bool
    comfort_rms: dict[int, float]
    comfort_rms_steady: dict[int, float]
    tracking_error: dict[int, float]
    string_stability: float | None
    steps_run: int


def string_stability_ratio(follower_traces, transient_cutoff: float = 500.0) -> float:
    """Speed-oscillation amplitude of the last follower over the first.

    Oscillation is the standard deviation of speed over the
    post-transient window; a ratio below 1 means the platoon dampens
    disturbances.

    Raises:
        DegenerateOscillationError: when the first follower's speed is
            essentially constant.
    """
    if len(follower_traces) < 2:
        raise ValueError("string stability needs at least two followers")

    def osc(trace) -> float:
        mask = np.asarray(trace["t"], dtype=float) > transient_cutoff
        window = np.asarray(trace["v"], dtype=float)[mask]
        if window.size < 2:
            raise ValueError("post-transient window is empty; "
                             "scenario too short for the cutoff")
        return float(np.std(window))

    first = osc(follower_traces[0])
    last = osc(follower_traces[-1])
    if first < 1e-6:
        raise DegenerateOscillationError(
            f"first follower oscillation {first:.2e} below 1e-6")
    return last / first


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def _build_rivers(scenario: Scenario, config: EnvConfig, params: VesselParams,
                  rng: np.random.Generator) -> tuple[list, object]:
    """Per-vessel river providers (index 0 = leader) and the AR world if any."""
    n_slots = scenario.followers + 1
    if scenario.kind == "ar_replay":
        lo, hi = INITIAL_SPEED_RANGE
        world = _ArWorld(config, params, initial_leader_speed=rng.uniform(lo, hi))
        return [world] * n_slots, world
    if scenario.kind == "sinusoidal":
        spec = scenario.river_waves or SinusoidalRiverSpec.default(config, rng)
        provider = _StaticRiver(lambda t, x, draft: sinusoidal_river(t, x, spec))
        return [provider] * n_slots, None
    # profile-backed kinds; leader_replay runs on a flat AR-mean river when
    # no profile is given (the replayed leader carries its own dynamics)
    profiles = scenario.profiles
    if profiles is None and scenario.profile_paths:
        profiles = tuple(RiverProfile.from_csv(p) for p in scenario.profile_paths)
    if profiles is None:
        if scenario.kind == "leader_replay":
            mean_river = RiverConditions(
                depth_below_keel=ArProcess(*config.ar_depth).stationary_mean(),
                cross_section=ArProcess(*config.ar_cross).stationary_mean(),
                stream_speed=0.0)
            provider = _StaticRiver(lambda t, x, draft: mean_river)
            return [provider] * n_slots, None
        raise ValueError(f"{scenario.kind} scenarios need a river profile")
    def profile_provider(profile: RiverProfile) -> _StaticRiver:
        return _StaticRiver(lambda t, x, draft: profile.conditions(x, draft))

    if len(profiles) == 1:
        providers = [profile_provider(profiles[0])] * n_slots
    elif len(profiles) == n_slots:
        providers = [profile_provider(p) for p in profiles]
    else:
        raise ValueError(
            f"need 1 or {n_slots} profiles, got {len(profiles)}")
    return providers, None


def _make_leader(scenario: Scenario, providers: list, ar_world,
                 config: EnvConfig, params: VesselParams,
                 rng: np.random.Generator):
    dt = config.dt
    if scenario.kind == "ar_replay":
        return _TrajectoryLeader(lambda t: ar_world.leader_speed, 0.0, dt)
    if scenario.kind == "sinusoidal":
        fn = scenario.leader_speed_fn or smooth_leader_speed()
        return _TrajectoryLeader(fn, 0.0, dt)
    if scenario.kind == "leader_replay":
        times, xs, vs = load_replay(scenario.replay_path)
        return _ReplayLeader(times, xs, vs, scenario.duration * dt)
    # dynamic vessel: constant power (river_profile) or schedule (platoon)
    if scenario.power_schedule is not None:
        schedule = piecewise_schedule(scenario.power_schedule)
    else:
        schedule = piecewise_schedule(((0.0, scenario.leader_power / params.max_power),))
    lo, hi = INITIAL_SPEED_RANGE
    speed = (scenario.initial_follower_speed
             if scenario.initial_follower_speed is not None
             else rng.uniform(lo, hi))
    state = VesselState(position=0.0, speed=speed, power=schedule(0.0) * params.max_power)
    return _PoweredLeader(schedule, providers[0], state, params, dt)


def run_scenario(agent, scenario: Scenario, config: EnvConfig | None = None,
                 params: VesselParams | None = None) -> ScenarioResult:
    """Simulate a scenario with the agent's deterministic policy.

    All randomness (initial speeds, AR draws, default wave phases) comes
    from the scenario seed, so repeated runs are bit-identical.  The run
    stops early when any pair collides.
    """
    config = config or EnvConfig()
    params = params or VesselParams()
    scenario.validate()
    rng = np.random.default_rng(np.random.SeedSequence(int(scenario.seed)))
    dt = config.dt

    providers, ar_world = _build_rivers(scenario, config, params, rng)
    leader = _make_leader(scenario, providers, ar_world, config, params, rng)

    lo, hi = INITIAL_SPEED_RANGE
    followers: list[VesselState] = []
    position = leader.position
    for _ in range(scenario.followers):
        position -= params.length + scenario.initial_gap
        speed = (scenario.initial_follower_speed
                 if scenario.initial_follower_speed is not None
                 else rng.uniform(lo, hi))
        followers.append(VesselState(position=position, speed=speed, power=0.0))

    unique_providers = []
    for p in providers:
        if all(p is not q for q in unique_providers):
            unique_providers.append(p)

    traces: list[dict[str, list]] = [
        {c: [] for c in VESSEL_TRACE_COLUMNS} for _ in range(scenario.followers + 1)
    ]

    def record(slot: int, t: float, x: float, v: float, power: float,
               gap: float, t_gap: float, river: RiverConditions) -> None:
        tr = traces[slot]
        tr["t"].append(t)
        tr["x"].append(x)
        tr["v"].append(v)
        tr["P"].append(power)
        tr["gap"].append(gap)
        tr["T"].append(t_gap)
        tr["h"].append(river.depth_below_keel)
        tr["A_cross"].append(river.cross_section)
        tr["v_str"].append(river.stream_speed)

    def follower_obs(k: int, t: float, pred_position: float,
                     pred_speed: float) -> tuple[Observation, float, float, RiverConditions]:
        st = followers[k]
        river = providers[k + 1].conditions(t, st.position, params.draft)
        gap = pred_position - params.length - st.position
        t_gap = time_gap(gap, st.speed - river.stream_speed)
        obs = observe(st.speed, st.power, gap, pred_speed, river, config,
                      params.max_power)
        return obs, gap, t_gap, river

    # initial records and observations (t = 0)
    leader_river = providers[0].conditions(0.0, leader.position, params.draft)
    record(0, 0.0, leader.position, leader.speed, leader.power,
           float("nan"), float("nan"), leader_river)
    observations = []
    pred_position, pred_speed = leader.position, leader.speed
    for k in range(scenario.followers):
        obs, gap, t_gap, river = follower_obs(k, 0.0, pred_position, pred_speed)
        record(k + 1, 0.0, followers[k].position, followers[k].speed,
               followers[k].power, gap, t_gap, river)
        observations.append(obs)
        pred_position, pred_speed = followers[k].position, followers[k].speed

    collision = False
    steps_run = 0
    for step_index in range(1, scenario.duration + 1):
        t = step_index * dt
        actions = [agent.act(obs) for obs in observations]
        for provider in unique_providers:
            provider.advance(rng)
        leader.advance(t)
        leader_river = providers[0].conditions(t, leader.position, params.draft)
        record(0, t, leader.position, leader.speed, leader.power,
               float("nan"), float("nan"), leader_river)

        pred_position, pred_speed = leader.position, leader.speed
        for k in range(scenario.followers):
            st = followers[k]
            st.power = actions[k] * params.max_power
            river = providers[k + 1].conditions(t, st.position, params.draft)
            accel = net_acceleration(st, river, params)
            new = integrate(st, accel, dt)
            if new.speed < 0.0:
                new.position = st.position + 0.5 * st.speed * dt
                new.speed = 0.0
            followers[k] = new
            obs, gap, t_gap, river_obs = follower_obs(k, t, pred_position, pred_speed)
            record(k + 1, t, new.position, new.speed, new.power, gap, t_gap,
                   river_obs)
            observations[k] = obs
            if gap <= 0.0:
                collision = True
            pred_position, pred_speed = new.position, new.speed
        steps_run = step_index
        if collision:
            break

    array_traces = [{k: np.asarray(v, dtype=float) for k, v in tr.items()}
                    for tr in traces]
    return _finalize(array_traces, scenario, params, collision, steps_run)


def _finalize(traces, scenario: Scenario, params: VesselParams,
              collision: bool, steps_run: int) -> ScenarioResult:
    cutoff = scenario.transient_cutoff
    min_gaps: dict[int, float] = {}
    comfort_rms: dict[int, float] = {}
    comfort_steady: dict[int, float] = {}
    tracking: dict[int, float] = {}

    def rms(values: np.ndarray) -> float:
        return float(np.sqrt(np.mean(values ** 2))) if values.size else float("nan")

    for k in range(1, scenario.followers + 1):
        tr = traces[k]
        min_gaps[k] = float(np.min(tr["gap"]))
        dp = np.diff(tr["P"]) / params.max_power
        comfort_rms[k] = rms(dp)
        steady = tr["t"][1:] > cutoff
        comfort_steady[k] = rms(dp[steady])
        pred_v = traces[k - 1]["v"]
        track_mask = tr["t"] > cutoff
        if np.any(track_mask):
            tracking[k] = float(np.mean(np.abs(tr["v"][track_mask]
                                               - pred_v[track_mask])))
        else:
            tracking[k] = float(np.mean(np.abs(tr["v"] - pred_v)))

    stability = None
    if scenario.followers >= 2:
        try:
            stability = string_stability_ratio(traces[1:], cutoff)
        except (DegenerateOscillationError, ValueError):
            stability = None
    return ScenarioResult(
        traces=traces, min_gaps=min_gaps, collision=collision,
        comfort_rms=comfort_rms, comfort_rms_steady=comfort_steady,
        tracking_error=tracking, string_stability=stability,
        steps_run=steps_run)


# ---------------------------------------------------------------------------
# factories and file I/O
# ---------------------------------------------------------------------------

def default_scenario(name: str, seed: int = 0,
                     config: EnvConfig | None = None,
                     params: VesselParams | None = None) -> Scenario:
    """Built-in scenario of each kind, fully determined by the seed."""
    config = config or EnvConfig()
    params = params or VesselParams()
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 17)))
    if name == "ar_replay":
        return Scenario(kind="ar_replay", duration=2000, seed=seed)
    if name == "sinusoidal":
        periods = rng.uniform(0.8, 1.25, size=2)
        amps = rng.uniform(0.7, 1.0, size=2)
        fn = smooth_leader_speed(amplitude=2.0 * amps[0],
                                 period=800.0 * periods[0],
                                 second_amplitude=1.0 * amps[1],
                                 second_period=1900.0 * periods[1])
        return Scenario(kind="sinusoidal", duration=2000, seed=seed,
                        river_waves=SinusoidalRiverSpec.default(config, rng),
                        leader_speed_fn=fn)
    if name == "river_profile":
        duration = 2500
        profile = synthetic_profile(_profile_span(duration, 1, 600.0, params),
                                    config, params, seed=seed + 1)
        return Scenario(kind="river_profile", duration=duration, seed=seed,
                        leader_power=0.5e6, profiles=(profile,))
    if name == "platoon":
        duration = 2800
        profile = synthetic_profile(_profile_span(duration, 5, 600.0, params),
                                    config, params, seed=seed + 1)
        return Scenario(kind="platoon", duration=duration, followers=5,
                        seed=seed, power_schedule=DEFAULT_JUMP_SCHEDULE,
                        profiles=(profile,))
    raise ValueError(f"no built-in scenario named {name!r}")


def _profile_span(duration: int, followers: int, initial_gap: float,
                  params: VesselParams) -> tuple[float, float]:
    tail = followers * (params.length + initial_gap) + 1000.0
    head = 9.0 * duration + 1000.0
    return (-tail, head)


def parse_scenario_file(path, config: EnvConfig | None = None,
                        params: VesselParams | None = None) -> Scenario:
    """Build a Scenario from a key-value file.

    Recognized keys: kind, duration, followers, seed, initial_gap,
    initial_speed, transient_cutoff, leader.amplitude, leader.period,
    leader.power, leader.schedule, leader.replay, river.profile (paths
    separated by ';'), river.<channel>_amplitude/period for the
    sinusoidal waves.
    """
    from .config import read_kv

    config = config or EnvConfig()
    raw = read_kv(path)
    known = {"kind", "duration", "followers", "seed", "initial_gap",
             "initial_speed", "transient_cutoff", "leader.amplitude",
             "leader.period", "leader.power", "leader.schedule",
             "leader.replay", "river.profile",
             "river.depth_amplitude", "river.depth_period",
             "river.cross_amplitude", "river.cross_period"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown scenario keys {sorted(unknown)}")
    if "kind" not in raw:
        raise ValueError(f"{path}: missing 'kind'")
    kind = raw["kind"]
    scenario = default_scenario(kind, seed=int(raw.get("seed", 0)),
                                config=config, params=params) \
        if kind in ("ar_replay", "sinusoidal", "river_profile", "platoon") \
        else Scenario(kind=kind, seed=int(raw.get("seed", 0)))

    if "duration" in raw:
        scenario.duration = int(raw["duration"])
    if "followers" in raw:
        scenario.followers = int(raw["followers"])
    if "initial_gap" in raw:
        scenario.initial_gap = float(raw["initial_gap"])
    if "initial_speed" in raw:
        scenario.initial_follower_speed = float(raw["initial_speed"])
    if "transient_cutoff" in raw:
        scenario.transient_cutoff = float(raw["transient_cutoff"])
    if "leader.power" in raw:
        scenario.leader_power = float(raw["leader.power"])
    if "leader.schedule" in raw:
        schedule_path = raw["leader.schedule"]
        with open(schedule_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            scenario.power_schedule = tuple(
                (float(r[0]), float(r[1])) for r in reader if r)
    if "leader.replay" in raw:
        scenario.replay_path = raw["leader.replay"]
    if "river.profile" in raw:
        scenario.profiles = None
        scenario.profile_paths = tuple(
            p.strip() for p in raw["river.profile"].split(";") if p.strip())
    if kind == "sinusoidal" and ("leader.amplitude" in raw or "leader.period" in raw):
        scenario.leader_speed_fn = smooth_leader_speed(
            amplitude=float(raw.get("leader.amplitude", 2.0)),
            period=float(raw.get("leader.period", 800.0)))
    if kind == "sinusoidal" and any(k.startswith("river.") for k in raw):
        base = SinusoidalRiverSpec.default(config)
        scenario.river_waves = SinusoidalRiverSpec(
            depth=replace(base.depth,
                          amplitude=float(raw.get("river.depth_amplitude",
                                                  base.depth.amplitude)),
                          period=float(raw.get("river.depth_period",
                                               base.depth.period))),
            cross_section=replace(base.cross_section,
                                  amplitude=float(raw.get("river.cross_amplitude",
                                                          base.cross_section.amplitude)),
                                  period=float(raw.get("river.cross_period",
                                                       base.cross_section.period))),
            stream=base.stream)
    scenario.validate()
    return scenario


def write_vessel_traces(out_dir, result: ScenarioResult,
                        prefix: str = "vessel") -> list[str]:
    """One trace CSV per vessel (index 0 = leader); returns the paths."""
    import os

    paths = []
    for idx, trace in enumerate(result.traces):
        path = os.path.join(out_dir, f"{prefix}_{idx}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(VESSEL_TRACE_COLUMNS) + "\n")
            for row in zip(*(trace[c] for c in VESSEL_TRACE_COLUMNS)):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        paths.append(path)
    return paths


def metrics_summary(result: ScenarioResult) -> dict[str, str]:
    """Key-value view of the aggregate metrics."""
    out: dict[str, str] = {
        "collision": "true" if result.collision else "false",
        "steps_run": str(result.steps_run),
    }
    for k in sorted(result.min_gaps):
        out[f"min_gap_{k}"] = repr(result.min_gaps[k])
        out[f"comfort_rms_{k}"] = repr(result.comfort_rms[k])
        out[f"comfort_rms_steady_{k}"] = repr(result.comfort_rms_steady[k])
        out[f"tracking_error_{k}"] = repr(result.tracking_error[k])
    if result.string_stability is not None:
        out["string_stability_ratio"] = repr(result.string_stability)
    return out
