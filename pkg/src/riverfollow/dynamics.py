"""Longitudinal vessel physics: thrust, resistance and time stepping.

All quantities are SI.  Speeds are ground-referenced unless a name says
otherwise; the hydrodynamics only ever see the water-relative speed
``v_rel = speed - stream_speed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

WATER_DENSITY = 1000.0  # kg/m^3


class DegenerateGeometryError(ValueError):
    """Submerged cross-section fills the channel (blockage ratio >= 1)."""


class NoEquilibriumError(ValueError):
    """Net force does not change sign on the equilibrium search bracket."""


@dataclass(frozen=True)
class VesselParams:
    """Physical constants of one vessel.

    Defaults describe a 110 m inland cargo vessel (3174 t, 11.4 m beam,
    2.8 m draft, 1 MW installed power).  The drag and friction
    coefficients are calibrated so that the full-power equilibrium
    water-relative speed over the mean river lies between 4 and 7 m/s.
    """

    mass: float = 3.174e6           # kg
    length: float = 110.0           # m
    beam: float = 11.4              # m
    draft: float = 2.8              # m
    max_power: float = 1.0e6        # W
    added_mass_fraction: float = 0.05
    prop_efficiency: float = 0.6
    drag_coeff_frontal: float = 0.25
    friction_coeff_hull: float = 0.0012
    shallow_coeff: float = 1.5
    thrust_speed_floor: float = 1.0  # m/s

    def __post_init__(self):
        positive = (
            "mass", "length", "beam", "draft", "max_power",
            "prop_efficiency", "drag_coeff_frontal", "friction_coeff_hull",
            "shallow_coeff", "thrust_speed_floor",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.added_mass_fraction < 0:
            raise ValueError("added_mass_fraction must be >= 0")

    @property
    def submerged_area(self) -> float:
        """Frontal cross-section below the waterline (beam x draft)."""
        return self.beam * self.draft

    @property
    def wetted_surface(self) -> float:
        """Approximate wetted hull surface: length x (beam + 2 x draft)."""
        return self.length * (self.beam + 2.0 * self.draft)

    @property
    def effective_mass(self) -> float:
        """Hull mass plus hydrodynamic added mass."""
        return self.mass * (1.0 + self.added_mass_fraction)


@dataclass
class VesselState:
    """Kinematic state of one vessel along the river axis."""

    position: float = 0.0  # m, bow position
    speed: float = 0.0     # m/s, ground-referenced
    power: float = 0.0     # W, current engine power

    def __post_init__(self):
        if not math.isfinite(self.speed):
            raise ValueError(f"speed must be finite, got {self.speed}")


@dataclass(frozen=True)
class RiverConditions:
    """Local river state at a vessel's position."""

    depth_below_keel: float   # m, clearance keel -> riverbed
    cross_section: float      # m^2, rectangular channel area
    stream_speed: float       # m/s, positive = direction of travel

    def __post_init__(self):
        if self.depth_below_keel < 0:
            raise ValueError(f"depth_below_keel must be >= 0, got {self.depth_below_keel}")
        if self.cross_section <= 0:
            raise ValueError(f"cross_section must be positive, got {self.cross_section}")
        if not math.isfinite(self.stream_speed):
            raise ValueError("stream_speed must be finite")


@dataclass(frozen=True)
class ForceBreakdown:
    """Longitudinal force terms, in N.  Positive thrust pushes forward."""

    thrust: float
    drag_hydro: float
    drag_hull: float
    stream_transfer: float  # kept at 0: the stream acts through v_rel only

    @property
    def net(self) -> float:
        return self.thrust - self.drag_hydro - self.drag_hull - self.stream_transfer


def thrust(power: float, v_rel: float, params: VesselParams) -> float:
    """Propeller thrust from engine power and water-relative speed.

    T = eta * P / max(v_rel, floor).  The speed floor keeps the
    conversion finite at bollard conditions (v_rel -> 0).
    """
    power = max(power, 0.0)
    return params.prop_efficiency * power / max(v_rel, params.thrust_speed_floor)


def resistance(v_rel: float, river: RiverConditions,
               params: VesselParams) -> tuple[float, float]:
    """Hydrodynamic drag terms at water-relative speed ``v_rel``.

    Frontal drag is quadratic in v_rel and amplified by the channel
    blockage ratio k = submerged_area / cross_section via 1/(1-k)^2
    (back-current effect in narrow channels).  Hull friction acts on the
    wetted surface with a shallow-water multiplier that grows as the
    keel clearance shrinks.  Both terms are odd in v_rel.

    Returns:
        (drag_hydro, drag_hull) in N.

    Raises:
        DegenerateGeometryError: if the vessel does not fit the channel.
    """
    k = params.submerged_area / river.cross_section
    if k >= 1.0:
        raise DegenerateGeometryError(
            f"blockage ratio {k:.3f} >= 1: submerged section "
            f"{params.submerged_area:.1f} m^2 exceeds channel {river.cross_section:.1f} m^2")
    signed_v2 = v_rel * abs(v_rel)
    drag_hydro = (0.5 * WATER_DENSITY * params.drag_coeff_frontal
                  * params.submerged_area * signed_v2 / (1.0 - k) ** 2)
    shallow = 1.0 + params.shallow_coeff / (1.0 + river.depth_below_keel / params.draft)
    drag_hull = (0.5 * WATER_DENSITY * params.friction_coeff_hull
                 * params.wetted_surface * signed_v2 * shallow)
    return drag_hydro, drag_hull


def forces(state: VesselState, river: RiverConditions,
           params: VesselParams) -> ForceBreakdown:
    """All longitudinal force terms for the current state."""
    v_rel = state.speed - river.stream_speed
    drag_hydro, drag_hull = resistance(v_rel, river, params)
    return ForceBreakdown(
        thrust=thrust(state.power, v_rel, params),
        drag_hydro=drag_hydro,
        drag_hull=drag_hull,
        stream_transfer=0.0,
    )


def net_acceleration(state: VesselState, river: RiverConditions,
                     params: VesselParams) -> float:
    """Momentum balance: (thrust - drag terms) / effective mass."""
    f = forces(state, river, params)
    return f.net / params.effective_mass


def step(state: VesselState, accel: float, dt: float) -> VesselState:
    """Advance one time step: Euler on speed, ballistic on position.

    speed' = speed + a*dt, position' = position + (speed + speed')/2 * dt.
    The integrator is raw (speed may go negative); callers clamp.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    new_speed = state.speed + accel * dt
    new_position = state.position + 0.5 * (state.speed + new_speed) * dt
    return replace(state, position=new_position, speed=new_speed)


def equilibrium_speed(power: float, river: RiverConditions,
                      params: VesselParams,
                      v_rel_max: float = 20.0, tol: float = 1e-10) -> float:
    """Ground speed at which the net force vanishes for a fixed power.

    Bisects on the water-relative speed in [0, v_rel_max] until the
    acceleration magnitude drops below ``tol``; the result is offset by
    the stream speed.

    Raises:
        NoEquilibriumError: if the acceleration does not change sign on
            the bracket (power too large for the bracket).
    """
    if power < 0:
        raise ValueError(f"power must be >= 0, got {power}")

    def accel_at(v_rel: float) -> float:
        drag_hydro, drag_hull = resistance(v_rel, river, params)
        return (thrust(power, v_rel, params) - drag_hydro - drag_hull) / params.effective_mass

    # drag vanishes at v_rel = 0, so the only root of a drag-only balance is 0
    if power == 0.0:
        return river.stream_speed

    lo, hi = 0.0, v_rel_max
    a_lo, a_hi = accel_at(lo), accel_at(hi)
    if a_lo <= 0.0:  # thrust floor guarantees a_lo > 0 for power > 0
        return river.stream_speed
    if a_hi >= 0.0:
        raise NoEquilibriumError(
            f"acceleration does not change sign on [0, {v_rel_max}] at P={power:.3g} W")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        a_mid = accel_at(mid)
        if abs(a_mid) < tol:
            return mid + river.stream_speed
        if a_mid > 0.0:
            lo = mid
        else:
            hi = mid
    raise NoEquilibriumError(f"bisection failed to reach |a| < {tol}")
