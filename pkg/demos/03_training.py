#!/usr/bin/env python3
# Train the vessel-following agent from scratch and plot the learning
# curve.  The default 150 episodes take a couple of minutes and already
# show the reward climbing; pass an episode count for a full run
# (600-800 reaches a safe, comfortable policy).

import os
import sys
import time

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from riverfollow import DdpgAgent, RiverEnv
from riverfollow.ddpg import save_checkpoint, train
from riverfollow.seeding import seed_streams

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 150
seed = 42

agent = DdpgAgent(rng=seed_streams(seed)["init"])
env = RiverEnv()

print(f"training {episodes} episodes (seed {seed}) ...")
t0 = time.time()
report = train(agent, env, episodes=episodes, seed=seed)
print(f"done in {time.time() - t0:.0f} s")

rewards = np.array(report.episode_rewards)
collisions = np.array(report.episode_collisions)
k = min(50, max(len(rewards) // 4, 1))
print(f"mean reward: first {k} episodes {rewards[:k].mean():.3f}, "
      f"last {k} episodes {rewards[-k:].mean():.3f}")
print(f"collisions: {collisions.sum()} total, "
      f"{collisions[-k:].sum()} in the last {k} episodes")

ckpt = os.path.join(OUT, "agent.rflw")
save_checkpoint(agent, ckpt)
print(f"checkpoint saved to {ckpt}")

window = max(len(rewards) // 40, 1)
smooth = np.convolve(rewards, np.ones(window) / window, mode="valid")
fig, axes = plt.subplots(1, 2, figsize=(11, 3.8))
axes[0].plot(rewards, alpha=0.3, lw=0.7)
axes[0].plot(np.arange(smooth.size) + window - 1, smooth, lw=1.5)
axes[0].set(xlabel="episode", ylabel="episode reward", title="learning curve")
axes[1].plot(np.cumsum(collisions))
axes[1].set(xlabel="episode", ylabel="cumulative collisions")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "learning_curve.png"), dpi=120)
print(f"wrote {OUT}/learning_curve.png")
