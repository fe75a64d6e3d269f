"""Vessel-following on inland waterways: physics, stochastic river
environment, from-scratch deterministic policy-gradient training,
headway calibration from AIS-style tracks, and a validation harness."""

from .ais import (
    FollowingEvent,
    LognormalFit,
    TrackPoint,
    extract_events,
    fit_lognormal,
    histogram_report,
    load_tracks,
    tracks_from_points,
)
from .config import ConfigError, DdpgParams, RunConfig, parse_run_config
from .ddpg import (
    DdpgAgent,
    OuNoise,
    ReplayBuffer,
    TrainReport,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .dynamics import (
    ForceBreakdown,
    RiverConditions,
    VesselParams,
    VesselState,
    equilibrium_speed,
    forces,
    net_acceleration,
    resistance,
    thrust,
)
from .env import (
    ArProcess,
    EnvConfig,
    Observation,
    RiverEnv,
    ar_step,
    denormalize,
    observe,
    reward_comfort,
    reward_safety,
    time_gap,
)
from .nets import AdamState, Mlp, adam_update, soft_update
from .scenarios import (
    RiverProfile,
    Scenario,
    ScenarioResult,
    SinusoidalRiverSpec,
    default_scenario,
    run_scenario,
    sinusoidal_river,
    string_stability_ratio,
    synthetic_profile,
)
from .seeding import seed_streams

__version__ = "0.1.0"
