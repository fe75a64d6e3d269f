import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riverfollow.dynamics import (
    DegenerateGeometryError,
    NoEquilibriumError,
    RiverConditions,
    VesselParams,
    VesselState,
    equilibrium_speed,
    forces,
    net_acceleration,
    resistance,
    step,
    thrust,
)

PARAMS = VesselParams()
MEAN_RIVER = RiverConditions(depth_below_keel=5.3469, cross_section=1664.0,
                             stream_speed=0.0)


class TestThrust:
    def test_zero_power_zero_thrust(self):
        assert thrust(0.0, 4.0, PARAMS) == 0.0

    def test_basic_arithmetic(self):
        assert thrust(1e6, 4.0, PARAMS) == pytest.approx(1.5e5)

    def test_speed_floor_engages(self):
        assert thrust(1e6, 0.5, PARAMS) == pytest.approx(6.0e5)

    def test_monotone_in_power(self):
        powers = np.linspace(0.0, 1e6, 50)
        values = [thrust(p, 3.0, PARAMS) for p in powers]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_negative_power_clamped(self):
        assert thrust(-5.0, 4.0, PARAMS) == 0.0


class TestResistance:
    def test_zero_at_rest(self):
        assert resistance(0.0, MEAN_RIVER, PARAMS) == (0.0, 0.0)

    def test_blockage_amplification(self):
        # k = 0.1 vs k = 0.2 multiplies frontal drag by (0.9/0.8)^2
        area = PARAMS.submerged_area
        wide = RiverConditions(5.0, area / 0.1, 0.0)
        narrow = RiverConditions(5.0, area / 0.2, 0.0)
        hydro_wide, _ = resistance(4.0, wide, PARAMS)
        hydro_narrow, _ = resistance(4.0, narrow, PARAMS)
        assert hydro_narrow / hydro_wide == pytest.approx((0.9 / 0.8) ** 2)

    def test_reference_values(self):
        # frozen from an independent evaluation of the closed form at
        # v_rel=4, h=3, A=1500 with default parameters
        river = RiverConditions(depth_below_keel=3.0, cross_section=1500.0,
                                stream_speed=0.0)
        hydro, hull = resistance(4.0, river, PARAMS)
        assert hydro == pytest.approx(66646.28593176878, rel=1e-12)
        assert hull == pytest.approx(30951.724137931036, rel=1e-12)

    @given(st.floats(min_value=0.01, max_value=15.0))
    def test_odd_in_relative_speed(self, v_rel):
        hydro_f, hull_f = resistance(v_rel, MEAN_RIVER, PARAMS)
        hydro_b, hull_b = resistance(-v_rel, MEAN_RIVER, PARAMS)
        assert hydro_b == -hydro_f
        assert hull_b == -hull_f

    def test_blockage_monotone_in_cross_section(self):
        areas = np.linspace(200.0, 3000.0, 40)
        drags = [resistance(4.0, RiverConditions(5.0, a, 0.0), PARAMS)[0]
                 for a in areas]
        assert all(b < a for a, b in zip(drags, drags[1:]))

    def test_shallow_water_monotone_in_depth(self):
        depths = np.linspace(0.0, 20.0, 40)
        totals = [sum(resistance(4.0, RiverConditions(h, 1664.0, 0.0), PARAMS))
                  for h in depths]
        assert all(b < a for a, b in zip(totals, totals[1:]))

    def test_degenerate_geometry(self):
        tight = RiverConditions(2.0, PARAMS.submerged_area * 0.99, 0.0)
        with pytest.raises(DegenerateGeometryError):
            resistance(3.0, tight, PARAMS)


class TestNetAcceleration:
    def test_zero_at_equilibrium(self):
        for power in (0.2e6, 0.6e6, 1.0e6):
            v_eq = equilibrium_speed(power, MEAN_RIVER, PARAMS)
            state = VesselState(position=0.0, speed=v_eq, power=power)
            assert abs(net_acceleration(state, MEAN_RIVER, PARAMS)) < 1e-9

    def test_rest_in_still_water(self):
        state = VesselState(position=0.0, speed=0.0, power=0.0)
        assert net_acceleration(state, MEAN_RIVER, PARAMS) == 0.0

    def test_full_power_at_stream_speed(self):
        river = RiverConditions(5.0, 1664.0, stream_speed=1.5)
        state = VesselState(position=0.0, speed=1.5, power=PARAMS.max_power)
        assert net_acceleration(state, river, PARAMS) > 0.0

    def test_stream_transfer_is_zero(self):
        state = VesselState(position=0.0, speed=4.0, power=0.5e6)
        assert forces(state, MEAN_RIVER, PARAMS).stream_transfer == 0.0


class TestStep:
    def test_uniform_motion(self):
        out = step(VesselState(0.0, 4.0, 0.0), accel=0.0, dt=1.0)
        assert out.speed == 4.0
        assert out.position == 4.0

    def test_ballistic_position(self):
        out = step(VesselState(0.0, 4.0, 0.0), accel=0.1, dt=1.0)
        assert out.speed == pytest.approx(4.1)
        assert out.position == pytest.approx(4.05)

    def test_raw_integrator_is_linear(self):
        out = step(VesselState(0.0, 0.0, 0.0), accel=-1.0, dt=1.0)
        assert out.speed == -1.0

    def test_power_unchanged(self):
        out = step(VesselState(0.0, 4.0, 7e5), accel=0.3, dt=1.0)
        assert out.power == 7e5

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            step(VesselState(0.0, 4.0, 0.0), accel=0.0, dt=0.0)

    def test_constant_acceleration_matches_closed_form(self):
        x0, v0, a, dt, n = 3.0, 2.0, 0.05, 1.0, 10_000
        state = VesselState(x0, v0, 0.0)
        for _ in range(n):
            state = step(state, a, dt)
        t = n * dt
        assert state.speed == pytest.approx(v0 + a * t, rel=1e-11)
        assert state.position == pytest.approx(x0 + v0 * t + 0.5 * a * t * t,
                                               rel=1e-11)


class TestEquilibriumSpeed:
    def test_zero_power_still_water(self):
        assert equilibrium_speed(0.0, MEAN_RIVER, PARAMS) == 0.0

    def test_strictly_increasing_with_power(self):
        powers = np.linspace(0.05e6, 1.0e6, 12)
        speeds = [equilibrium_speed(p, MEAN_RIVER, PARAMS) for p in powers]
        assert all(b > a for a, b in zip(speeds, speeds[1:]))

    def test_full_power_band_over_mean_river(self):
        v_rel = equilibrium_speed(PARAMS.max_power, MEAN_RIVER, PARAMS)
        assert 4.0 <= v_rel <= 7.0

    def test_stream_offset(self):
        river = RiverConditions(5.3469, 1664.0, stream_speed=1.2)
        still = equilibrium_speed(0.5e6, MEAN_RIVER, PARAMS)
        moving = equilibrium_speed(0.5e6, river, PARAMS)
        assert moving == pytest.approx(still + 1.2, abs=1e-6)

    def test_no_root_error(self):
        with pytest.raises(NoEquilibriumError):
            equilibrium_speed(1e12, MEAN_RIVER, PARAMS)


class TestCoastDown:
    def test_speed_decays_monotonically_to_zero(self):
        # power 0, still water: caller-side clamping keeps speed >= 0
        # quadratic drag decays hyperbolically, so the approach to zero
        # is slow; 20000 s gets well below walking pace
        state = VesselState(0.0, 5.0, 0.0)
        speeds = [state.speed]
        for _ in range(20_000):
            a = net_acceleration(state, MEAN_RIVER, PARAMS)
            state = step(state, a, 1.0)
            if state.speed < 0.0:
                state.speed = 0.0
            speeds.append(state.speed)
        assert all(b <= a for a, b in zip(speeds, speeds[1:]))
        assert all(s >= 0.0 for s in speeds)
        assert speeds[-1] < 0.05


class TestValidation:
    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            VesselParams(mass=0.0)

    def test_rejects_negative_added_mass(self):
        with pytest.raises(ValueError):
            VesselParams(added_mass_fraction=-0.1)

    def test_river_rejects_negative_depth(self):
        with pytest.raises(ValueError):
            RiverConditions(depth_below_keel=-1.0, cross_section=1000.0,
                            stream_speed=0.0)
