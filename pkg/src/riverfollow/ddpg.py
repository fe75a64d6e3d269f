"""Deterministic policy-gradient agent: replay, exploration noise,
actor-critic updates, the training loop and binary checkpoints.

The actor maps the 7-component observation to a tanh value in [-1, 1]
that is affinely rescaled to the power fraction in [0, 1]; exploration
noise is added in tanh space before the rescale.  The critic scores the
observation concatenated with the (rescaled) action.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .env import RiverEnv
from .nets import AdamState, Mlp, adam_update, clone_network, soft_update
from .seeding import seed_streams

CHECKPOINT_MAGIC = b"RFLW"
CHECKPOINT_VERSION = 1


class InsufficientBufferError(RuntimeError):
    """Replay buffer holds fewer transitions than one batch."""


class CheckpointError(ValueError):
    """Checkpoint file is malformed or has the wrong magic/version."""


class ReplayBuffer:
    """Fixed-capacity ring buffer of (s, a, r, s', done) transitions."""

    def __init__(self, capacity: int, obs_dim: int = 7):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.actions = np.zeros((self.capacity, 1))
        self.rewards = np.zeros((self.capacity, 1))
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.dones = np.zeros((self.capacity, 1))
        self._next = 0
        self.size = 0

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self._next
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = 1.0 if done else 0.0
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        """Uniform sample without replacement within the batch."""
        if self.size < batch_size:
            raise InsufficientBufferError(
                f"buffer holds {self.size} transitions, need {batch_size}")
        idx = _sample_without_replacement(rng, self.size, batch_size)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.dones[idx])


def _sample_without_replacement(rng, n: int, k: int) -> np.ndarray:
    # Floyd's algorithm: O(k) regardless of buffer size
    chosen: set[int] = set()
    out = np.empty(k, dtype=np.intp)
    pos = 0
    for j in range(n - k, n):
        t = int(rng.integers(0, j + 1))
        if t in chosen:
            t = j
        chosen.add(t)
        out[pos] = t
        pos += 1
    return out


class OuNoise:
    """Ornstein-Uhlenbeck process for temporally correlated exploration."""

    def __init__(self, theta: float = 0.15, sigma: float = 0.2,
                 mu: float = 0.0, dt: float = 1.0):
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.dt = dt
        self.value = mu

    def reset(self) -> None:
        self.value = self.mu

    def sample(self, rng: np.random.Generator) -> float:
        self.value += (self.theta * (self.mu - self.value) * self.dt
                       + self.sigma * math.sqrt(self.dt) * rng.standard_normal())
        return self.value


class DdpgAgent:
    """Actor-critic pair with target copies, Adam states and replay."""

    def __init__(self, obs_dim: int = 7, hidden: int = 32,
                 gamma: float = 0.95, tau: float = 0.001,
                 batch_size: int = 32, lr_actor: float = 0.001,
                 lr_critic: float = 0.001, buffer_capacity: int = 100_000,
                 ou_theta: float = 0.15, ou_sigma: float = 0.2,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng()
        self.obs_dim = obs_dim
        self.gamma = gamma
        self.tau = tau
        self.batch_size = batch_size
        self.actor = Mlp((obs_dim, hidden, hidden, 1), output="tanh", rng=rng)
        self.critic = Mlp((obs_dim + 1, hidden, hidden, 1), output="identity", rng=rng)
        self.target_actor = clone_network(self.actor)
        self.target_critic = clone_network(self.critic)
        self.adam_actor = AdamState(self.actor.parameters(), lr=lr_actor)
        self.adam_critic = AdamState(self.critic.parameters(), lr=lr_critic)
        self.buffer = ReplayBuffer(buffer_capacity, obs_dim)
        self.noise = OuNoise(theta=ou_theta, sigma=ou_sigma)

    def act(self, obs, explore: bool = False,
            rng: np.random.Generator | None = None) -> float:
        """Map an observation to a power fraction in [0, 1].

        With ``explore`` the OU noise is added to the raw tanh output
        before the affine rescale; the result is clamped to [0, 1].
        """
        x = np.asarray(obs, dtype=np.float64)
        y = float(self.actor.forward(x)[0])
        if explore:
            if rng is None:
                raise ValueError("explore=True requires an rng")
            y += self.noise.sample(rng)
        action = 0.5 * (y + 1.0)
        return min(max(action, 0.0), 1.0)

    def policy_actions(self, obs_batch: np.ndarray, target: bool = False) -> np.ndarray:
        """Deterministic actions for a batch of observations."""
        net = self.target_actor if target else self.actor
        return 0.5 * (net.forward(obs_batch) + 1.0)

    def learn_step(self, rng: np.random.Generator | None = None,
                   batch=None) -> tuple[float, float]:
        """One critic + actor gradient step followed by soft target updates.

        Args:
            rng: generator for buffer sampling (unused when ``batch`` given).
            batch: optional explicit (s, a, r, s', done) arrays.

        Returns:
            (critic mse loss, mean policy Q-value before the update).
        """
        if batch is None:
            batch = self.buffer.sample(rng, self.batch_size)
        obs, actions, rewards, next_obs, dones = (np.asarray(a, dtype=np.float64)
                                                  for a in batch)

        # critic target: r + gamma * (1 - done) * Q'(s', mu'(s'))
        next_actions = self.policy_actions(next_obs, target=True)
        next_q = self.target_critic.forward(np.hstack([next_obs, next_actions]))
        targets = rewards + self.gamma * (1.0 - dones) * next_q

        q, cache = self.critic.forward_cached(np.hstack([obs, actions]))
        err = q - targets
        critic_loss = float(np.mean(err ** 2))
        grads, _ = self.critic.backward(cache, (2.0 / len(err)) * err)
        adam_update(self.adam_critic, self.critic.parameters(), grads)

        # actor ascends mean Q(s, mu(s)); chain rule picks up the 0.5
        # from the tanh -> [0,1] rescale
        y_pol, actor_cache = self.actor.forward_cached(obs)
        q_pol, critic_cache = self.critic.forward_cached(
            np.hstack([obs, 0.5 * (y_pol + 1.0)]))
        actor_objective = float(np.mean(q_pol))
        _, dq_dinput = self.critic.backward(
            critic_cache, np.full_like(q_pol, 1.0 / len(q_pol)),
            with_param_grads=False)
        dq_da = dq_dinput[:, self.obs_dim:]
        ascent, _ = self.actor.backward(actor_cache, 0.5 * dq_da)
        adam_update(self.adam_actor, self.actor.parameters(),
                    [-g for g in ascent])

        soft_update(self.target_critic, self.critic, self.tau)
        soft_update(self.target_actor, self.actor, self.tau)
        return critic_loss, actor_objective


@dataclass
class TrainReport:
    """Per-episode training metrics."""

    episode_rewards: list[float] = field(default_factory=list)
    episode_collisions: list[int] = field(default_factory=list)
    checkpoints: list[str] = field(default_factory=list)

    def mean_reward(self, first: int | None = None, last: int | None = None) -> float:
        rewards = self.episode_rewards
        if first is not None:
            rewards = rewards[:first]
        elif last is not None:
            rewards = rewards[-last:]
        return float(np.mean(rewards)) if rewards else float("nan")


def train(agent: DdpgAgent, env: RiverEnv, episodes: int, seed: int | None,
          checkpoint_dir: str | None = None,
          checkpoint_every: int = 0) -> TrainReport:
    """Run the acting/learning loop for a number of episodes.

    Every episode covers ``episode_len`` environment steps; when the gap
    closes early the environment resets in place and the episode
    continues (the collision is counted).  One gradient step runs per
    environment step once the buffer holds one batch.  All randomness
    derives from ``seed`` through the named env/noise streams, so a
    fixed seed reproduces the run exactly.
    """
    streams = seed_streams(seed)
    env_rng = streams["env"]
    noise_rng = streams["noise"]
    report = TrainReport()
    steps_per_episode = env.config.episode_len

    for episode in range(episodes):
        obs = env.reset(rng=env_rng) if episode == 0 else env.reset()
        agent.noise.reset()
        ep_reward = 0.0
        ep_collisions = 0
        for t in range(steps_per_episode):
            action = agent.act(obs, explore=True, rng=noise_rng)
            next_obs, reward, done, info = env.step(action)
            agent.buffer.add(np.asarray(obs), action, reward,
                             np.asarray(next_obs), done)
            ep_reward += reward
            obs = next_obs
            if agent.buffer.size >= agent.batch_size:
                agent.learn_step(noise_rng)
            if done:
                if info["gap"] <= 0.0:
                    ep_collisions += 1
                if t < steps_per_episode - 1:
                    obs = env.reset()
        report.episode_rewards.append(ep_reward)
        report.episode_collisions.append(ep_collisions)
        if (checkpoint_dir and checkpoint_every > 0
                and (episode + 1) % checkpoint_every == 0):
            path = os.path.join(checkpoint_dir, f"checkpoint_{episode + 1:06d}.rflw")
            save_checkpoint(agent, path)
            report.checkpoints.append(path)
    return report


# ---------------------------------------------------------------------------
# checkpoint serialization
#
# Layout (all little-endian):
#   magic "RFLW" | u16 version
#   4 networks (actor, critic, target actor, target critic), each:
#     u32 layer count | u32 x (layer count + 1) dims |
#     per layer: f64 weights row-major, f64 biases
#   2 optimizer states (actor, critic), each:
#     u64 step | f64 lr, beta1, beta2, eps |
#     per parameter (same order as the network): f64 first moments,
#     then per parameter: f64 second moments
# ---------------------------------------------------------------------------

def _pack_network(net: Mlp) -> bytes:
    parts = [struct.pack("<I", len(net.weights))]
    parts.append(struct.pack(f"<{len(net.sizes)}I", *net.sizes))
    for w, b in zip(net.weights, net.biases):
        parts.append(w.astype("<f8").tobytes())
        parts.append(b.astype("<f8").tobytes())
    return b"".join(parts)


def _pack_adam(state: AdamState) -> bytes:
    parts = [struct.pack("<Q", state.step),
             struct.pack("<4d", state.lr, state.beta1, state.beta2, state.eps)]
    for m in state.m:
        parts.append(m.astype("<f8").tobytes())
    for v in state.v:
        parts.append(v.astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64s(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").copy()


def _unpack_network(reader: _Reader, output: str) -> Mlp:
    n_layers = reader.u32()
    if not 1 <= n_layers <= 64:
        raise CheckpointError(f"implausible layer count {n_layers}")
    sizes = [reader.u32() for _ in range(n_layers + 1)]
    net = Mlp(sizes, output=output, rng=np.random.default_rng(0))
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        net.weights[i] = reader.f64s(fan_in * fan_out).reshape(fan_in, fan_out)
        net.biases[i] = reader.f64s(fan_out)
    return net


def _unpack_adam(reader: _Reader, params) -> AdamState:
    step = reader.u64()
    lr, beta1, beta2, eps = struct.unpack("<4d", reader.take(32))
    state = AdamState(params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    state.step = step
    state.m = [reader.f64s(p.size).reshape(p.shape) for p in params]
    state.v = [reader.f64s(p.size).reshape(p.shape) for p in params]
    return state


def save_checkpoint(agent: DdpgAgent, path: str) -> None:
    """Write the four networks and both optimizer states to ``path``."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<H", CHECKPOINT_VERSION)]
    for net in (agent.actor, agent.critic, agent.target_actor, agent.target_critic):
        parts.append(_pack_network(net))
    parts.append(_pack_adam(agent.adam_actor))
    parts.append(_pack_adam(agent.adam_critic))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path: str, **agent_kwargs) -> DdpgAgent:
    """Rebuild an agent from a checkpoint file.

    Hyperparameters not stored in the file (gamma, tau, batch size,
    noise, buffer capacity) come from ``agent_kwargs`` or defaults.

    Raises:
        CheckpointError: on bad magic, version or truncation.
    """
    with open(path, "rb") as fh:
        reader = _Reader(fh.read())
    if reader.take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    version = reader.u16()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")

    actor = _unpack_network(reader, "tanh")
    critic = _unpack_network(reader, "identity")
    target_actor = _unpack_network(reader, "tanh")
    target_critic = _unpack_network(reader, "identity")
    if critic.sizes[0] != actor.sizes[0] + 1:
        raise CheckpointError("critic input does not match actor input + action")

    agent = DdpgAgent(obs_dim=actor.sizes[0], hidden=actor.sizes[1],
                      **agent_kwargs)
    agent.actor = actor
    agent.critic = critic
    agent.target_actor = target_actor
    agent.target_critic = target_critic
    agent.adam_actor = _unpack_adam(reader, actor.parameters())
    agent.adam_critic = _unpack_adam(reader, critic.parameters())
    if reader.pos != len(reader.data):
        raise CheckpointError(f"{path}: {len(reader.data) - reader.pos} trailing bytes")
    return agent
