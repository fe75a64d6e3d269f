"""Vessel-following training environment.

The leader trajectory and the river (depth below keel, channel
cross-section, stream speed) evolve as independent AR(1) processes.  The
agent picks an engine-power fraction each second; the reward combines a
lognormal headway-density safety term with a squared power-change
comfort term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import (
    RiverConditions,
    VesselParams,
    VesselState,
    net_acceleration,
    step as integrate,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)

#: uniform range for initial ground speeds of both vessels, m/s
INITIAL_SPEED_RANGE = (2.0, 6.0)

#: columns of an exported episode trace CSV
TRACE_COLUMNS = ("t", "x_f", "v_f", "P", "x_l", "v_l", "gap", "T",
                 "h", "A_cross", "v_str", "r_safety", "r_comfort", "r")


class InvalidActionError(ValueError):
    """Action outside the [0, 1] power-fraction range."""


@dataclass
class ArProcess:
    """First-order autoregression X' = c + phi*X + sqrt(sigma2)*noise."""

    c: float
    phi: float
    sigma2: float
    current: float = 0.0

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")

    def stationary_mean(self) -> float:
        return self.c / (1.0 - self.phi)

    def stationary_var(self) -> float:
        return self.sigma2 / (1.0 - self.phi ** 2)


def ar_step(proc: ArProcess, noise: float) -> float:
    """Advance the process with one standard-normal draw; returns the new value."""
    proc.current = proc.c + proc.phi * proc.current + math.sqrt(proc.sigma2) * noise
    return proc.current


def advance_river_processes(proc_leader: ArProcess, proc_depth: ArProcess,
                            proc_cross: ArProcess, proc_stream: ArProcess,
                            rng: np.random.Generator, min_rel_speed: float,
                            cross_floor: float) -> float:
    """One AR step for the leader speed and the three river channels.

    Draws four independent standard normals, then clamps the stored
    states: depth below keel >= 0, channel section >= ``cross_floor``
    (keeps the blockage ratio well below 1), and the leader speed at
    least ``min_rel_speed`` above the stream (slower vessels are not
    maneuverable).  Returns the clamped leader speed.
    """
    draws = rng.standard_normal(4)
    lead_proposal = ar_step(proc_leader, draws[0])
    depth_proposal = ar_step(proc_depth, draws[1])
    cross_proposal = ar_step(proc_cross, draws[2])
    stream = ar_step(proc_stream, draws[3])

    proc_depth.current = max(depth_proposal, 0.0)
    proc_cross.current = max(cross_proposal, cross_floor)
    proc_leader.current = max(lead_proposal, stream + min_rel_speed)
    return proc_leader.current


@dataclass(frozen=True)
class EnvConfig:
    """Environment parameters; defaults are the calibrated production set."""

    v_scale: float = 6.0        # m/s
    g_scale: float = 800.0      # m
    h_scale: float = 3.0        # m
    a_scale: float = 1500.0     # m^2
    dt: float = 1.0             # s
    episode_len: int = 500      # steps
    initial_gap: float = 600.0  # m
    beta: float = 0.0004        # comfort weight
    mu_t: float = 5.41          # lognormal location of the headway fit
    sigma_t: float = 1.06       # lognormal scale of the headway fit
    min_rel_speed: float = 2.0  # m/s, leader maneuverability floor
    # AR(1) triples (c, phi, sigma2)
    ar_leader: tuple[float, float, float] = (0.010, 0.994, 0.034)
    ar_depth: tuple[float, float, float] = (0.262, 0.951, 0.381)
    ar_cross: tuple[float, float, float] = (4.992, 0.997, 598.0)
    ar_stream: tuple[float, float, float] = (0.0, 0.993, 0.030)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.episode_len <= 0:
            raise ValueError("episode_len must be positive")


class Observation(NamedTuple):
    """The normalized 7-component agent state."""

    speed_n: float
    power_n: float
    gap_n: float
    rel_speed_n: float
    depth_n: float
    cross_section_n: float
    stream_n: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


def observe(speed: float, power: float, gap: float, leader_speed: float,
            river: RiverConditions, config: EnvConfig,
            max_power: float) -> Observation:
    """Normalize raw physical state into an Observation."""
    return Observation(
        speed_n=speed / config.v_scale,
        power_n=power / max_power,
        gap_n=gap / config.g_scale,
        rel_speed_n=(speed - leader_speed) / config.v_scale,
        depth_n=river.depth_below_keel / config.h_scale,
        cross_section_n=river.cross_section / config.a_scale,
        stream_n=river.stream_speed / config.v_scale,
    )


def denormalize(obs: Observation, config: EnvConfig,
                max_power: float) -> dict[str, float]:
    """Recover raw physical values from a normalized Observation."""
    return {
        "speed": obs.speed_n * config.v_scale,
        "power": obs.power_n * max_power,
        "gap": obs.gap_n * config.g_scale,
        "rel_speed": obs.rel_speed_n * config.v_scale,
        "depth_below_keel": obs.depth_n * config.h_scale,
        "cross_section": obs.cross_section_n * config.a_scale,
        "stream_speed": obs.stream_n * config.v_scale,
    }


def time_gap(gap: float, v_rel: float, floor: float = 0.1) -> float:
    """Bow-stern time gap: gap over water-relative speed.

    The speed floor keeps the gap finite as v_rel -> 0; non-positive
    spatial gaps (collision regime) return 0.
    """
    if gap <= 0.0:
        return 0.0
    return gap / max(v_rel, floor)


def reward_safety(t_gap: float, mu_t: float, sigma_t: float) -> float:
    """Lognormal density of the time gap; 0 at and below T = 0.

    Evaluated in log space so extreme gaps underflow to 0 instead of
    overflowing.
    """
    if t_gap <= 0.0:
        return 0.0
    log_t = math.log(t_gap)
    log_f = (-log_t - math.log(sigma_t * SQRT_2PI)
             - (log_t - mu_t) ** 2 / (2.0 * sigma_t ** 2))
    return math.exp(log_f)


def reward_comfort(power_now: float, power_prev: float, dt: float,
                   p_max: float) -> float:
    """Negative squared per-step power change, in [-1, 0].

    The power rate is discretized over one step, so dt cancels and the
    term reduces to -((P_t - P_{t-1}) / P_max)^2.
    """
    return -((power_now - power_prev) / p_max) ** 2


@dataclass
class EpisodeState:
    """Full mutable state of one episode."""

    follower: VesselState
    leader_speed: float
    leader_position: float
    leader_length: float
    proc_leader: ArProcess
    proc_depth: ArProcess
    proc_cross: ArProcess
    proc_stream: ArProcess
    step_index: int = 0
    rng_seed: int | None = None

    @property
    def gap(self) -> float:
        """Bow-to-stern gap: leader stern minus follower bow."""
        return self.leader_position - self.leader_length - self.follower.position

    @property
    def river(self) -> RiverConditions:
        return RiverConditions(
            depth_below_keel=self.proc_depth.current,
            cross_section=self.proc_cross.current,
            stream_speed=self.proc_stream.current,
        )


class RiverEnv:
    """Markov-decision-process environment for one follower vessel.

    Each instance owns its RNG stream: pass ``seed`` (or a Generator) to
    :meth:`reset` once, and later no-argument resets continue the same
    stream, so a fixed seed yields a bit-identical episode sequence.
    """

    def __init__(self, config: EnvConfig | None = None,
                 params: VesselParams | None = None):
        self.config = config or EnvConfig()
        self.params = params or VesselParams()
        self.state: EpisodeState | None = None
        self.rng: np.random.Generator | None = None

    def reset(self, seed: int | None = None,
              rng: np.random.Generator | None = None) -> Observation:
        """Start a new episode and return the initial observation.

        Initial engine power is zero, both vessels draw their speed
        uniformly from [2, 6] m/s, the gap starts at ``initial_gap`` and
        the river processes start at their stationary means.
        """
        if rng is not None:
            self.rng = rng
        elif seed is not None or self.rng is None:
            self.rng = np.random.default_rng(seed)
        cfg = self.config
        lo, hi = INITIAL_SPEED_RANGE
        follower_speed = self.rng.uniform(lo, hi)
        leader_speed = self.rng.uniform(lo, hi)

        proc_leader = ArProcess(*cfg.ar_leader, current=leader_speed)
        proc_depth = ArProcess(*cfg.ar_depth)
        proc_depth.current = proc_depth.stationary_mean()
        proc_cross = ArProcess(*cfg.ar_cross)
        proc_cross.current = proc_cross.stationary_mean()
        proc_stream = ArProcess(*cfg.ar_stream)
        proc_stream.current = proc_stream.stationary_mean()

        self.state = EpisodeState(
            follower=VesselState(position=0.0, speed=follower_speed, power=0.0),
            leader_speed=leader_speed,
            leader_position=cfg.initial_gap + self.params.length,
            leader_length=self.params.length,
            proc_leader=proc_leader,
            proc_depth=proc_depth,
            proc_cross=proc_cross,
            proc_stream=proc_stream,
            step_index=0,
            rng_seed=seed,
        )
        return self._observe()

    def advance_environment(self) -> None:
        """Advance leader speed and the river processes by one step.

        The leader position advances ballistically with the clamped
        speed; see :func:`advance_river_processes` for the clamps.
        """
        st = self.state
        new_leader_speed = advance_river_processes(
            st.proc_leader, st.proc_depth, st.proc_cross, st.proc_stream,
            self.rng, self.config.min_rel_speed,
            2.0 * self.params.submerged_area)
        st.leader_position += 0.5 * (st.leader_speed + new_leader_speed) * self.config.dt
        st.leader_speed = new_leader_speed

    def step(self, action: float) -> tuple[Observation, float, bool, dict]:
        """Apply a power fraction in [0, 1] and advance one time step.

        Returns (observation, reward, done, info); ``info`` carries the
        raw trace fields named in TRACE_COLUMNS.  The episode ends at
        ``episode_len`` steps or when the gap closes to zero.
        """
        if not 0.0 <= action <= 1.0:
            raise InvalidActionError(f"action must be in [0, 1], got {action}")
        st = self.state
        cfg = self.config
        params = self.params

        power_prev = st.follower.power
        st.follower.power = action * params.max_power

        self.advance_environment()
        river = st.river

        accel = net_acceleration(st.follower, river, params)
        follower = integrate(st.follower, accel, cfg.dt)
        if follower.speed < 0.0:
            # no reverse motion: stop within the step
            follower.position = st.follower.position + 0.5 * st.follower.speed * cfg.dt
            follower.speed = 0.0
        st.follower = follower
        st.step_index += 1

        gap = st.gap
        t_gap = time_gap(gap, follower.speed - river.stream_speed)
        r_safety = reward_safety(t_gap, cfg.mu_t, cfg.sigma_t)
        r_comfort = reward_comfort(follower.power, power_prev, cfg.dt, params.max_power)
        reward = r_safety + cfg.beta * r_comfort
        done = st.step_index >= cfg.episode_len or gap <= 0.0

        info = {
            "t": st.step_index, "x_f": follower.position, "v_f": follower.speed,
            "P": follower.power, "x_l": st.leader_position, "v_l": st.leader_speed,
            "gap": gap, "T": t_gap, "h": river.depth_below_keel,
            "A_cross": river.cross_section, "v_str": river.stream_speed,
            "r_safety": r_safety, "r_comfort": r_comfort, "r": reward,
        }
        return self._observe(), reward, done, info

    def _observe(self) -> Observation:
        st = self.state
        return observe(st.follower.speed, st.follower.power, st.gap,
                       st.leader_speed, st.river, self.config,
                       self.params.max_power)


def write_trace(path, rows: list[dict]) -> None:
    """Write an episode trace to CSV with the standard column set."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in TRACE_COLUMNS) + "\n")
