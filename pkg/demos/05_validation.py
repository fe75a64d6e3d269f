#!/usr/bin/env python3
# Validation scenarios with a trained checkpoint: AR replay, the
# artificial sinusoidal river, a synthetic river profile with a
# constant-power leader, and the five-follower platoon behind a
# jump-power leader.
#
# Usage: python3 05_validation.py [checkpoint]
# (defaults to the checkpoint written by 03_training.py)

import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from riverfollow.ddpg import load_checkpoint
from riverfollow.scenarios import default_scenario, metrics_summary, run_scenario

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

ckpt = sys.argv[1] if len(sys.argv) > 1 else os.path.join(OUT, "agent.rflw")
if not os.path.exists(ckpt):
    raise SystemExit(f"no checkpoint at {ckpt}; run 03_training.py first "
                     "(600+ episodes recommended)")
agent = load_checkpoint(ckpt)
print(f"loaded {ckpt}")

for name in ("ar_replay", "sinusoidal", "river_profile", "platoon"):
    scenario = default_scenario(name, seed=5)
    result = run_scenario(agent, scenario)
    summary = metrics_summary(result)
    line = (f"{name:14s} collision={summary['collision']:5s} "
            f"min_gap={min(result.min_gaps.values()):6.1f} m "
            f"comfort_rms={max(result.comfort_rms_steady.values()):.4f}")
    if result.string_stability is not None:
        line += f" string_ratio={result.string_stability:.3f}"
    print(line)

    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
    for idx, trace in enumerate(result.traces):
        label = "leader" if idx == 0 else f"follower {idx}"
        axes[0].plot(trace["t"], trace["v"], lw=0.9, label=label)
        if idx > 0:
            axes[1].plot(trace["t"], trace["gap"], lw=0.9)
            axes[2].plot(trace["t"], trace["P"] / 1e6, lw=0.9)
    axes[0].set_ylabel("speed (m/s)")
    axes[0].legend(fontsize=7, ncol=3)
    axes[1].set_ylabel("gap (m)")
    axes[2].set(xlabel="time (s)", ylabel="power (MW)")
    fig.suptitle(name)
    fig.tight_layout()
    fig.savefig(os.path.join(OUT, f"scenario_{name}.png"), dpi=120)

print(f"wrote scenario plots to {OUT}/")
