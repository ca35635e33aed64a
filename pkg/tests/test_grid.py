"""Small-signal grid relations: plants, bus divider, load response, superposition."""

import numpy as np
import pytest

from dcgridlab.control import PiGains
from dcgridlab.grid import (CableParams, ConverterParams, GridConfig,
                            GridModelError, bus_voltage_load_response,
                            bus_voltage_source_weights, converter_voltage_tf,
                            default_grid, power_exchange_tfs, power_plant_tf,
                            total_bus_voltage, voltage_loop_plant_tf)
from dcgridlab.lti import bandwidth_3db, poles

POWER_GAINS = PiGains(kp=0.001, ki=0.130)


def asymmetric_grid():
    g = default_grid()
    heavy = ConverterParams(rated_power=4000.0, voltage_loop_tau=0.005,
                            cable=CableParams(resistance=2.0, inductance=0.012))
    return GridConfig(converters=(heavy, g.converters[1]),
                      nominal_bus_voltage=g.nominal_bus_voltage,
                      fixed_voltage_reference=g.fixed_voltage_reference)


class TestValidation:
    def test_cable_positive(self):
        with pytest.raises(GridModelError):
            CableParams(resistance=0.0, inductance=1e-3)
        with pytest.raises(GridModelError):
            CableParams(resistance=0.5, inductance=-1e-3)

    def test_converter_positive(self):
        cable = CableParams(0.5, 3e-3)
        with pytest.raises(GridModelError):
            ConverterParams(rated_power=0.0, voltage_loop_tau=0.005, cable=cable)
        with pytest.raises(GridModelError):
            ConverterParams(rated_power=1000.0, voltage_loop_tau=0.0, cable=cable)

    def test_grid_needs_two_converters(self):
        g = default_grid()
        with pytest.raises(GridModelError):
            GridConfig(converters=(g.converters[0],), nominal_bus_voltage=400.0,
                       fixed_voltage_reference=400.0)

    def test_two_converter_relations_reject_three(self):
        g = default_grid()
        three = GridConfig(converters=g.converters + (g.converters[0],),
                           nominal_bus_voltage=400.0, fixed_voltage_reference=400.0)
        with pytest.raises(GridModelError):
            bus_voltage_source_weights(three)
        with pytest.raises(GridModelError):
            bus_voltage_load_response(three)


class TestConverterVoltageLoop:
    def test_bench_time_constant(self):
        g = converter_voltage_tf(default_grid().converters[0])
        assert g.num.coeffs == (1.0,)
        assert g.den.coeffs == (1.0, 0.005)

    def test_unity_dc_gain(self):
        for tau in (1e-3, 5e-3, 0.1):
            conv = ConverterParams(1000.0, tau, CableParams(0.5, 3e-3))
            assert converter_voltage_tf(conv).dc_gain() == pytest.approx(1.0)

    def test_pole_location(self):
        g = converter_voltage_tf(default_grid().converters[0])
        assert poles(g)[0] == pytest.approx(-200.0)


class TestPowerPlant:
    def test_bench_plant(self):
        g = power_plant_tf(default_grid(), 0)
        assert g.num.coeffs == (400.0,)
        assert g.den.coeffs == pytest.approx((0.5, 0.0055, 1.5e-5))
        assert bandwidth_3db(g) == pytest.approx(116.6, abs=0.5)

    def test_dc_gain(self):
        g = power_plant_tf(default_grid(), 0)
        assert g.dc_gain() == pytest.approx(800.0)

    def test_gain_scales_with_bus_voltage(self):
        g1 = default_grid()
        g2 = GridConfig(converters=g1.converters, nominal_bus_voltage=800.0,
                        fixed_voltage_reference=800.0)
        p1 = power_plant_tf(g1, 0)
        p2 = power_plant_tf(g2, 0)
        for w in (0.1, 10.0, 1e3):
            assert abs(p2(1j * w)) == pytest.approx(2 * abs(p1(1j * w)), rel=1e-12)

    def test_index_checked(self):
        with pytest.raises(GridModelError):
            power_plant_tf(default_grid(), 5)


class TestBusDivider:
    def test_symmetric_cables_half(self):
        w1, w2 = bus_voltage_source_weights(default_grid())
        for s in (0.0, 1j, 100j):
            assert w1(s) == pytest.approx(0.5, rel=1e-12)
            assert w2(s) == pytest.approx(0.5, rel=1e-12)

    def test_resistive_divider_at_dc(self):
        w1, w2 = bus_voltage_source_weights(asymmetric_grid())
        assert w1(0.0) == pytest.approx(0.2)
        assert w2(0.0) == pytest.approx(0.8)

    def test_weights_sum_to_one_everywhere(self):
        w1, w2 = bus_voltage_source_weights(asymmetric_grid())
        for w in np.logspace(-2, 5, 25):
            assert abs(w1(1j * w) + w2(1j * w) - 1.0) < 1e-12


class TestLoadResponse:
    def test_dc_value(self):
        h = bus_voltage_load_response(default_grid())
        assert h.dc_gain() == pytest.approx(-6.25e-4)

    def test_negative_real_at_dc(self):
        for g in (default_grid(), asymmetric_grid()):
            assert bus_voltage_load_response(g).dc_gain() < 0

    def test_four_kw_step(self):
        h = bus_voltage_load_response(default_grid())
        assert h.dc_gain() * 4000.0 == pytest.approx(-2.5)

    def test_magnitude_halves_when_voltage_doubles(self):
        g1 = default_grid()
        g2 = GridConfig(converters=g1.converters, nominal_bus_voltage=800.0,
                        fixed_voltage_reference=800.0)
        h1, h2 = bus_voltage_load_response(g1), bus_voltage_load_response(g2)
        for w in (0.1, 10.0, 1e3):
            assert abs(h2(1j * w)) == pytest.approx(0.5 * abs(h1(1j * w)), rel=1e-12)


class TestSuperposition:
    def test_zero_inputs(self):
        model = total_bus_voltage(default_grid())
        assert model.response(1j * 3.0, 0.0, 0.0, 0.0) == 0.0

    def test_matches_sum_of_parts(self):
        grid = asymmetric_grid()
        model = total_bus_voltage(grid)
        w1, w2 = bus_voltage_source_weights(grid)
        h = bus_voltage_load_response(grid)
        dv1, dv2, dp = 1.3, -0.4, 2500.0
        for w in np.logspace(-2, 4, 20):
            s = 1j * w
            want = w1(s) * dv1 + w2(s) * dv2 + h(s) * dp
            got = model.response(s, dv1, dv2, dp)
            assert abs(got - want) <= 1e-12 * max(1.0, abs(want))

    def test_restoration_balance_at_dc(self):
        # equal 2.5 V source rises cancel the sag of a 4 kW load step
        model = total_bus_voltage(default_grid())
        assert model.response(0.0, 2.5, 2.5, 4000.0) == pytest.approx(0.0, abs=1e-12)


class TestPowerExchange:
    def test_zero_difference_zero_power(self):
        p1, p2 = power_exchange_tfs(default_grid())
        assert p1(1j) * 0.0 == 0.0
        assert p2(1j) * 0.0 == 0.0

    def test_dc_exchange(self):
        p1, _ = power_exchange_tfs(default_grid())
        # 1.25 V across the 0.5 ohm cable at 400 V moves 1 kW
        assert p1(0.0).real * 1.25 == pytest.approx(1000.0)

    def test_power_balance_identity(self):
        # the two exchange relations split any load change exactly
        grid = asymmetric_grid()
        w1, w2 = bus_voltage_source_weights(grid)
        h = bus_voltage_load_response(grid)
        p1, p2 = power_exchange_tfs(grid)
        dv1, dv2, dp = 0.7, 1.1, 3000.0
        for w in np.logspace(-2, 3, 15):
            s = 1j * w
            vg = w1(s) * dv1 + w2(s) * dv2 + h(s) * dp
            total = p1(s) * (dv1 - vg) + p2(s) * (dv2 - vg)
            assert abs(total - dp) <= 1e-9 * dp


class TestOuterVoltagePlant:
    def test_integrator_structure(self):
        g = voltage_loop_plant_tf(default_grid(), 0, POWER_GAINS)
        # power PI integrator dominates at low frequency: phase -> -90 deg
        assert abs(g.den(0.0)) == pytest.approx(0.0, abs=1e-15)
        lo = g(1j * 1e-4)
        assert np.angle(lo, deg=True) == pytest.approx(-90.0, abs=1.0)

    def test_symmetric_divider_half(self):
        g = voltage_loop_plant_tf(default_grid(), 0, PiGains(kp=1.0, ki=0.0))
        # with a unit P-only controller the plant is Gv/2
        assert g(0.0).real == pytest.approx(0.5)

    def test_modes_differ(self):
        a = voltage_loop_plant_tf(default_grid(), 0, POWER_GAINS, mode="as-written")
        b = voltage_loop_plant_tf(default_grid(), 0, POWER_GAINS, mode="closed-inner")
        assert abs(a(10j)) != pytest.approx(abs(b(10j)), rel=1e-3)

    def test_unknown_mode_rejected(self):
        with pytest.raises(GridModelError):
            voltage_loop_plant_tf(default_grid(), 0, POWER_GAINS, mode="other")
