#!/usr/bin/env python3
# Vessel physics walk-through: force balance, equilibrium speeds and a
# coast-down, for the default 110 m inland cargo vessel.

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from riverfollow import (
    RiverConditions,
    VesselParams,
    VesselState,
    equilibrium_speed,
    forces,
    net_acceleration,
    resistance,
)
from riverfollow.dynamics import step

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

params = VesselParams()
river = RiverConditions(depth_below_keel=5.35, cross_section=1664.0,
                        stream_speed=0.0)

# --- resistance decomposition over relative speed ------------------------
speeds = np.linspace(0.0, 8.0, 200)
hydro = np.array([resistance(v, river, params)[0] for v in speeds])
hull = np.array([resistance(v, river, params)[1] for v in speeds])

print("resistance at v_rel = 4 m/s:",
      f"frontal {hydro[speeds.searchsorted(4.0)]/1e3:.1f} kN,",
      f"hull {hull[speeds.searchsorted(4.0)]/1e3:.1f} kN")

# shallow water and narrow channels both amplify drag
shallow = RiverConditions(depth_below_keel=1.0, cross_section=1664.0,
                          stream_speed=0.0)
narrow = RiverConditions(depth_below_keel=5.35, cross_section=300.0,
                         stream_speed=0.0)
for name, cond in [("deep/wide", river), ("shallow", shallow), ("narrow", narrow)]:
    total = sum(resistance(4.0, cond, params)) / 1e3
    print(f"  total drag at 4 m/s, {name:10s}: {total:7.1f} kN")

# --- equilibrium speed vs engine power ------------------------------------
powers = np.linspace(0.05e6, 1.0e6, 40)
v_eq = np.array([equilibrium_speed(p, river, params) for p in powers])
print(f"\nfull-power equilibrium: {v_eq[-1]:.2f} m/s "
      f"({v_eq[-1] * 3.6:.1f} km/h through water)")

# --- coast-down from 5 m/s with the engine off ----------------------------
state = VesselState(position=0.0, speed=5.0, power=0.0)
trace = [state.speed]
for _ in range(3600):
    accel = net_acceleration(state, river, params)
    state = step(state, accel, 1.0)
    trace.append(state.speed)
trace = np.array(trace)
print(f"coast-down: 5.0 -> {trace[-1]:.2f} m/s after one hour "
      "(quadratic drag decays hyperbolically)")

f = forces(VesselState(0.0, 4.0, 0.6e6), river, params)
print(f"\nforce balance at 4 m/s, 0.6 MW: thrust {f.thrust/1e3:.1f} kN, "
      f"drag {(f.drag_hydro + f.drag_hull)/1e3:.1f} kN, "
      f"net accel {f.net/params.effective_mass*1e3:.2f} mm/s^2")

fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
axes[0].plot(speeds, hydro / 1e3, label="frontal + blockage")
axes[0].plot(speeds, hull / 1e3, label="hull friction")
axes[0].set(xlabel="relative speed (m/s)", ylabel="force (kN)",
            title="resistance decomposition")
axes[0].legend()
axes[1].plot(powers / 1e6, v_eq)
axes[1].set(xlabel="engine power (MW)", ylabel="equilibrium speed (m/s)",
            title="speed vs power")
axes[2].plot(np.arange(trace.size) / 60.0, trace)
axes[2].set(xlabel="time (min)", ylabel="speed (m/s)", title="coast-down")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "vessel_physics.png"), dpi=120)
print(f"\nwrote {OUT}/vessel_physics.png")
