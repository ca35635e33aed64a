"""PI stepping, sharing weights, scheme types, and the exchange channel."""

import math

import pytest

from dcgridlab.control import (CascadeScheme, CommChannel, ControlError,
                               ConventionalScheme, Measurement, PiGains,
                               PiState, bus_voltage_estimate,
                               cascade_power_reference, compute_weights,
                               conventional_reference, conventional_step,
                               exchange_info, pi_step, weights_from_ratings)
from dcgridlab.grid import default_grid


class TestWeights:
    def test_bench_ratings(self):
        assert compute_weights(default_grid()) == pytest.approx((2 / 3, 1 / 3))

    def test_equal_ratings(self):
        assert weights_from_ratings([3000.0, 3000.0]) == pytest.approx((0.5, 0.5))

    def test_single_converter(self):
        assert weights_from_ratings([1234.0]) == pytest.approx((1.0,))

    def test_sum_to_one(self):
        for ratings in ([1.0, 2.0, 3.0], [10.0, 0.1], [7.0] * 5):
            assert sum(weights_from_ratings(ratings)) == pytest.approx(1.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ControlError):
            weights_from_ratings([1000.0, 0.0])


class TestPiGains:
    def test_negative_integral_rejected(self):
        with pytest.raises(ControlError):
            PiGains(kp=1.0, ki=-0.1)

    def test_non_finite_rejected(self):
        with pytest.raises(ControlError):
            PiGains(kp=math.inf, ki=0.0)


class TestPiStep:
    def test_zero_error_zero_output(self):
        state = PiState()
        for _ in range(10):
            out, state = pi_step(PiGains(2.0, 5.0), state, 0.0, 1e-3)
            assert out == 0.0

    def test_pure_proportional(self):
        out, _ = pi_step(PiGains(1.0, 0.0), PiState(), 3.7, 1e-3)
        assert out == pytest.approx(3.7)

    def test_trapezoid_of_constant(self):
        # integrating a constant unit error for 1 s at 1 kHz accumulates 1.0
        gains = PiGains(kp=0.0, ki=1.0)
        state = PiState()
        out = 0.0
        for _ in range(1000):
            out, state = pi_step(gains, state, 1.0, 1e-3)
        assert out == pytest.approx(1.0, abs=1e-6)
        assert state.integrator == pytest.approx(1.0, abs=1e-6)

    def test_trapezoid_averages_adjacent_errors(self):
        gains = PiGains(kp=0.0, ki=1.0)
        _, state = pi_step(gains, PiState(), 0.0, 1.0)
        out, state = pi_step(gains, state, 1.0, 1.0)
        assert out == pytest.approx(0.5)  # (0 + 1)/2 * dt

    def test_output_clamped(self):
        out, _ = pi_step(PiGains(10.0, 0.0), PiState(), 100.0, 1e-3, lo=-2.0, hi=2.0)
        assert out == 2.0

    def test_conditional_integration_freezes_at_clamp(self):
        gains = PiGains(kp=0.0, ki=1.0)
        state = PiState()
        for _ in range(100):
            out, state = pi_step(gains, state, 10.0, 1.0, lo=-5.0, hi=5.0)
        assert out == 5.0
        assert abs(state.integrator) <= 5.0 + 1e-12

    def test_rejects_bad_dt(self):
        with pytest.raises(ControlError):
            pi_step(PiGains(1.0, 1.0), PiState(), 1.0, 0.0)


class TestSchemes:
    def test_cascade_weights_validated(self):
        with pytest.raises(ControlError):
            CascadeScheme(power_pi=PiGains(1, 1), bus_voltage_pi=PiGains(1, 1),
                          weights=(0.5, 0.4))

    def test_conventional_droop_nonnegative(self):
        with pytest.raises(ControlError):
            ConventionalScheme(droop_resistance=-0.5, voltage_pi=PiGains(1, 1),
                               current_pi=PiGains(1, 1))

    def test_droop_arithmetic(self):
        scheme = ConventionalScheme(droop_resistance=0.5,
                                    voltage_pi=PiGains(0, 0),
                                    current_pi=PiGains(0, 0))
        # 10 A through the 0.5 ohm virtual impedance drops the reference 5 V
        ref = conventional_reference(scheme, current=10.0, dv=0.0, di=0.0,
                                     active=True)
        assert ref == pytest.approx(-5.0)

    def test_inactive_scheme_keeps_primary_reference(self):
        scheme = ConventionalScheme(droop_resistance=0.0,
                                    voltage_pi=PiGains(1, 1),
                                    current_pi=PiGains(1, 1))
        assert conventional_reference(scheme, 5.0, dv=3.0, di=2.0, active=False) == 0.0

    def test_conventional_step_zero_measurements(self):
        scheme = ConventionalScheme(droop_resistance=0.5,
                                    voltage_pi=PiGains(1.0, 2.0),
                                    current_pi=PiGains(1.0, 2.0))
        dv, di, _, _ = conventional_step(
            scheme, (2 / 3, 1 / 3), Measurement(), Measurement(), 0,
            PiState(), PiState(), dt=1e-2, clamp=40.0)
        assert dv == 0.0 and di == 0.0

    def test_cascade_reference_split(self):
        scheme = CascadeScheme(power_pi=PiGains(1, 1), bus_voltage_pi=PiGains(1, 1),
                               weights=(2 / 3, 1 / 3))
        # a measured 3 kW total with no corrections splits 2 kW / 1 kW
        r0 = cascade_power_reference(scheme, 0, own_power=2000.0,
                                     neighbor_power=1000.0, voltage_correction=0.0,
                                     demand=0.0, clamp=8000.0)
        r1 = cascade_power_reference(scheme, 1, own_power=1000.0,
                                     neighbor_power=2000.0, voltage_correction=0.0,
                                     demand=0.0, clamp=4000.0)
        assert r0 == pytest.approx(2000.0)
        assert r1 == pytest.approx(1000.0)

    def test_cascade_reference_clamped(self):
        scheme = CascadeScheme(power_pi=PiGains(1, 1), bus_voltage_pi=PiGains(1, 1),
                               weights=(2 / 3, 1 / 3))
        r = cascade_power_reference(scheme, 0, 1e6, 1e6, 0.0, 0.0, clamp=8000.0)
        assert r == 8000.0


class TestCommChannel:
    def test_zero_delay_pass_through(self):
        ch = CommChannel(period=0.0)
        view = exchange_info(Measurement(power=5.0), sender=1, channel=ch)
        assert view == Measurement()  # nothing from the neighbor yet
        ch.publish(0, Measurement(power=42.0))
        assert ch.neighbor_view(1).power == 42.0

    def test_constant_signal_identical_after_first_sample(self):
        ch = CommChannel(period=1e-3)
        m = Measurement(power=7.0, current=1.0, terminal_voltage=0.1)
        ch.publish(0, m)
        ch.publish(0, m)
        assert ch.neighbor_view(1) == m

    def test_ramp_lags_one_period(self):
        # 100 W/s ramp published every 1 ms: the received value lags 0.1 W
        ch = CommChannel(period=1e-3)
        for k in range(5):
            t = k * 1e-3
            ch.publish(0, Measurement(power=100.0 * t))
        true_now = 100.0 * 4e-3
        assert true_now - ch.neighbor_view(1).power == pytest.approx(0.1)

    def test_negative_period_rejected(self):
        with pytest.raises(ControlError):
            CommChannel(period=-1.0)


class TestBusEstimate:
    def test_average_of_terminals(self):
        own = Measurement(terminal_voltage=2.0)
        nb = Measurement(terminal_voltage=-1.0)
        assert bus_voltage_estimate(own, nb) == pytest.approx(0.5)
