"""Run configuration: one flat key-value file covers the vessel, the
environment, the agent hyperparameters and the run bookkeeping.

The format is ``key = value`` per line with ``#`` comments.  Missing
keys fall back to the computed defaults (the calibrated production
parameter set); unknown keys are rejected so typos cannot silently
change a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .dynamics import VesselParams
from .env import EnvConfig


class ConfigError(ValueError):
    """Bad configuration file: unknown key, bad value or unreadable line."""


def read_kv(path) -> dict[str, str]:
    """Parse a key-value file; later duplicates override earlier ones."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = text.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_kv(path, mapping: dict[str, str], header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for key, value in mapping.items():
            fh.write(f"{key} = {value}\n")


@dataclass(frozen=True)
class DdpgParams:
    """Agent hyperparameters (the production training set)."""

    gamma: float = 0.95
    tau: float = 0.001
    batch_size: int = 32
    lr_actor: float = 0.001
    lr_critic: float = 0.001
    buffer_capacity: int = 100_000
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    hidden_size: int = 32

    def agent_kwargs(self) -> dict:
        return {
            "hidden": self.hidden_size, "gamma": self.gamma, "tau": self.tau,
            "batch_size": self.batch_size, "lr_actor": self.lr_actor,
            "lr_critic": self.lr_critic, "buffer_capacity": self.buffer_capacity,
            "ou_theta": self.ou_theta, "ou_sigma": self.ou_sigma,
        }


@dataclass
class RunConfig:
    """Everything a reproducible run needs besides the output paths."""

    vessel: VesselParams = field(default_factory=VesselParams)
    env: EnvConfig = field(default_factory=EnvConfig)
    ddpg: DdpgParams = field(default_factory=DdpgParams)
    seed: int = 0
    episodes: int = 800
    checkpoint_every: int = 200
    calibration_sample_count: int | None = None
    calibration_speed_reference: str | None = None


def _parse_bool_free_float(text: str) -> float:
    return float(text)


def _parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text}")
    return int(value)


# dotted key -> (section, attribute or (attribute, tuple index), parser)
_VESSEL_KEYS = {
    f"vessel.{name}": name for name in (
        "mass", "length", "beam", "draft", "max_power", "added_mass_fraction",
        "prop_efficiency", "drag_coeff_frontal", "friction_coeff_hull",
        "shallow_coeff", "thrust_speed_floor")
}
_ENV_FLOAT_KEYS = {
    f"env.{name}": name for name in (
        "v_scale", "g_scale", "h_scale", "a_scale", "dt", "initial_gap",
        "beta", "mu_t", "sigma_t", "min_rel_speed")
}
_ENV_AR_KEYS = {}
for _proc in ("leader", "depth", "cross", "stream"):
    for _i, _part in enumerate(("c", "phi", "sigma2")):
        _ENV_AR_KEYS[f"env.ar_{_proc}_{_part}"] = (f"ar_{_proc}", _i)
_DDPG_FLOAT_KEYS = {
    f"ddpg.{name}": name for name in (
        "gamma", "tau", "lr_actor", "lr_critic", "ou_theta", "ou_sigma")
}
_DDPG_INT_KEYS = {
    f"ddpg.{name}": name for name in ("batch_size", "buffer_capacity", "hidden_size")
}
_RUN_INT_KEYS = {"run.seed": "seed", "run.episodes": "episodes",
                 "run.checkpoint_every": "checkpoint_every"}


def known_keys() -> list[str]:
    keys = (list(_VESSEL_KEYS) + list(_ENV_FLOAT_KEYS) + ["env.episode_len"]
            + list(_ENV_AR_KEYS) + list(_DDPG_FLOAT_KEYS) + list(_DDPG_INT_KEYS)
            + list(_RUN_INT_KEYS)
            + ["calibration.sample_count", "calibration.speed_reference"])
    return keys


def parse_run_config(path=None) -> RunConfig:
    """Defaults plus the overrides from ``path`` (None = pure defaults)."""
    rc = RunConfig()
    if path is None:
        return rc
    raw = read_kv(path)
    unknown = set(raw) - set(known_keys())
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")

    def take(key, parser):
        try:
            return parser(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key}: {exc}") from None

    vessel_updates = {attr: take(key, float)
                      for key, attr in _VESSEL_KEYS.items() if key in raw}
    if vessel_updates:
        rc.vessel = replace(rc.vessel, **vessel_updates)

    env_updates = {attr: take(key, float)
                   for key, attr in _ENV_FLOAT_KEYS.items() if key in raw}
    if "env.episode_len" in raw:
        env_updates["episode_len"] = take("env.episode_len", _parse_int)
    ar_updates: dict[str, list[float]] = {}
    for key, (attr, index) in _ENV_AR_KEYS.items():
        if key in raw:
            triple = ar_updates.setdefault(attr, list(getattr(rc.env, attr)))
            triple[index] = take(key, float)
    env_updates.update({attr: tuple(vals) for attr, vals in ar_updates.items()})
    if env_updates:
        rc.env = replace(rc.env, **env_updates)

    ddpg_updates = {attr: take(key, float)
                    for key, attr in _DDPG_FLOAT_KEYS.items() if key in raw}
    ddpg_updates.update({attr: take(key, _parse_int)
                         for key, attr in _DDPG_INT_KEYS.items() if key in raw})
    if ddpg_updates:
        rc.ddpg = replace(rc.ddpg, **ddpg_updates)

    for key, attr in _RUN_INT_KEYS.items():
        if key in raw:
            setattr(rc, attr, take(key, _parse_int))
    if "calibration.sample_count" in raw:
        rc.calibration_sample_count = take("calibration.sample_count", _parse_int)
    if "calibration.speed_reference" in raw:
        rc.calibration_speed_reference = raw["calibration.speed_reference"]
    return rc


def resolved_snapshot(rc: RunConfig) -> dict[str, str]:
    """Every known key with its resolved value, in registry order."""
    out: dict[str, str] = {}
    for key, attr in _VESSEL_KEYS.items():
        out[key] = repr(getattr(rc.vessel, attr))
    for key, attr in _ENV_FLOAT_KEYS.items():
        out[key] = repr(getattr(rc.env, attr))
    out["env.episode_len"] = str(rc.env.episode_len)
    for key, (attr, index) in _ENV_AR_KEYS.items():
        out[key] = repr(getattr(rc.env, attr)[index])
    for key, attr in _DDPG_FLOAT_KEYS.items():
        out[key] = repr(getattr(rc.ddpg, attr))
    for key, attr in _DDPG_INT_KEYS.items():
        out[key] = str(getattr(rc.ddpg, attr))
    for key, attr in _RUN_INT_KEYS.items():
        out[key] = str(getattr(rc, attr))
    if rc.calibration_sample_count is not None:
        out["calibration.sample_count"] = str(rc.calibration_sample_count)
    if rc.calibration_speed_reference is not None:
        out["calibration.speed_reference"] = rc.calibration_speed_reference
    return out


def write_fit_file(path, mu: float, sigma: float, sample_count: int,
                   speed_reference: str) -> None:
    """Write a headway fit as a config fragment usable by the trainer."""
    write_kv(path, {
        "env.mu_t": repr(mu),
        "env.sigma_t": repr(sigma),
        "calibration.sample_count": str(sample_count),
        "calibration.speed_reference": speed_reference,
    }, header="lognormal time-gap fit")
