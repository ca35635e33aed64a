"""Impedance-sweep pole trajectories and stability classification."""

import numpy as np
import pytest

from dcgridlab.config import POWER_PI, VOLTAGE_PI
from dcgridlab.grid import default_grid, power_plant_tf
from dcgridlab.lti import poles, realize, step_response, tf_constant, tf_feedback, tf_series
from dcgridlab.rootlocus import (ImpedanceSweep, SweepError,
                                 max_resistance_bound, sweep_power_loop,
                                 sweep_voltage_loop)
from dcgridlab.tuning import pi_tf

RATIO = 0.5 / 0.003


@pytest.fixture(scope="module")
def grid():
    return default_grid()


@pytest.fixture(scope="module")
def default_sweep():
    return ImpedanceSweep(r_min=0.1, r_max=2.0, ratio_r_over_l=RATIO, steps=50)


@pytest.fixture(scope="module")
def power_locus(grid, default_sweep):
    return sweep_power_loop(grid, POWER_PI, default_sweep)


@pytest.fixture(scope="module")
def voltage_locus(grid, default_sweep):
    return sweep_voltage_loop(grid, POWER_PI, VOLTAGE_PI, default_sweep)


class TestSweepValidation:
    def test_single_step_rejected(self):
        with pytest.raises(SweepError):
            ImpedanceSweep(r_min=0.1, r_max=2.0, ratio_r_over_l=RATIO, steps=1)

    def test_reversed_range_rejected(self):
        with pytest.raises(SweepError):
            ImpedanceSweep(r_min=2.0, r_max=0.1, ratio_r_over_l=RATIO, steps=10)

    def test_inductance_follows_ratio(self, default_sweep):
        rs = default_sweep.resistances()
        assert rs[0] == pytest.approx(0.1)
        assert rs[-1] == pytest.approx(2.0)
        # at the top of the range: 2 ohm at the fixed ratio means 12 mH
        assert rs[-1] / RATIO == pytest.approx(0.012)


class TestPowerLoopSweep:
    def test_all_steps_stable(self, power_locus):
        assert power_locus.all_stable

    def test_dominant_pole_moves_toward_axis(self, power_locus):
        doms = [max(s.poles, key=lambda p: p.real).real for s in power_locus.steps]
        assert doms[-1] > doms[0]

    def test_nominal_step_matches_direct_closure(self, grid, power_locus):
        # the sweep step nearest the nominal 0.5 ohm cable reproduces the
        # poles of the directly closed nominal loop
        step = min(power_locus.steps, key=lambda s: abs(s.resistance - 0.5))
        loop = tf_series(pi_tf(POWER_PI), power_plant_tf(grid, 0))
        closed = tf_feedback(loop, tf_constant(1.0))
        want = poles(closed)
        # nominal step resistance differs slightly from 0.5 on the log grid
        rel = abs(step.resistance - 0.5) / 0.5
        for p in step.poles:
            assert min(abs(p - w) for w in want) < max(10 * rel * abs(p), 1e-6)

    def test_conjugate_symmetry(self, power_locus):
        for step in power_locus.steps:
            ps = np.array(step.poles)
            assert np.allclose(np.sort_complex(ps),
                               np.sort_complex(np.conj(ps)), rtol=1e-9, atol=1e-9)

    def test_trajectories_are_continuous(self, power_locus):
        paths = power_locus.trajectories()
        jumps = np.abs(np.diff(paths, axis=0))
        scale = 1.0 + np.abs(paths[:-1])
        # 50 log steps over a factor 20 move each coefficient ~6% per step
        assert np.all(jumps / scale < 0.5)

    def test_default_sweep_pairing_is_unambiguous(self, power_locus):
        assert power_locus.pairing_ambiguities() == []


class TestVoltageLoopSweep:
    def test_all_steps_stable(self, voltage_locus):
        assert voltage_locus.all_stable

    def test_dominant_pair_in_left_half_plane(self, voltage_locus):
        for step in voltage_locus.steps:
            pair = [p for p in step.poles if abs(p.imag) > 1e-9]
            assert pair, "expected a complex dominant pair"
            assert max(p.real for p in pair) < 0

    def test_conjugate_symmetry(self, voltage_locus):
        for step in voltage_locus.steps:
            ps = np.array(step.poles)
            assert np.allclose(np.sort_complex(ps),
                               np.sort_complex(np.conj(ps)), rtol=1e-9, atol=1e-9)


class TestStabilityTimeDomainConsistency:
    def test_classification_matches_step_decay(self, grid, power_locus):
        # three sampled sweep points: a classified-stable loop's closed-loop
        # step response must converge to its DC gain
        for step in (power_locus.steps[0], power_locus.steps[24],
                     power_locus.steps[-1]):
            from dcgridlab.rootlocus import _grid_with_first_cable
            g = _grid_with_first_cable(grid, step.resistance, step.inductance)
            loop = tf_series(pi_tf(POWER_PI), power_plant_tf(g, 0))
            closed = tf_feedback(loop, tf_constant(1.0))
            y = step_response(realize(closed), dt=1e-4, n_steps=40000)
            tail = np.abs(y[-100:] - closed.dc_gain())
            head = np.abs(y[:100] - closed.dc_gain())
            assert step.stable
            assert tail.max() < 1e-3 * head.max()

    def test_unstable_loop_detected_and_diverges(self, grid):
        # flip the integral action sign path by negating kp enough to
        # destabilize: positive feedback around the plant
        from dcgridlab.control import PiGains
        bad = PiGains(kp=-0.01, ki=0.0)
        loop = tf_series(pi_tf(bad), power_plant_tf(grid, 0))
        closed = tf_feedback(loop, tf_constant(1.0))
        assert any(p.real > 0 for p in poles(closed))
        y = step_response(realize(closed), dt=1e-4, n_steps=20000)
        assert np.abs(y[-1]) > 10 * np.abs(y[100])


class TestResistanceBound:
    def test_bench_bound(self, grid):
        # 5 percent regulation at 10 A rated current on the 400 V bus
        assert max_resistance_bound(grid) == pytest.approx(2.0)

    def test_zero_ratio(self, grid):
        assert max_resistance_bound(grid, regulation_ratio=0.0) == 0.0

    def test_scaled_inputs(self, grid):
        assert max_resistance_bound(grid, regulation_ratio=0.10,
                                    rated_current=20.0) == pytest.approx(2.0)

    def test_bad_current_rejected(self, grid):
        with pytest.raises(SweepError):
            max_resistance_bound(grid, rated_current=0.0)
