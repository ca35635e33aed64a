"""Fixed-step time-domain simulation of the small-signal grid.

The plant is the four-state linear interconnection of both converter voltage
loops and both cable currents.  The load draws a commanded power through the
nominal bus voltage, which pins the current sum between events; a load step
therefore enters as a state jump whose split follows the inductive divider.
Between controller updates the plant advances by exact zero-order-hold
discretization (matrix exponential), so integration error never contaminates
transient scores.

Controllers run on two cadences backed by two sampled channels.  Telemetry
(the neighbor power feeding the cascade reference arithmetic) flows at the
control rate, so it arrives one control period old; droop and the cascade's
inner power PI also run every control period.  The coordination layer (the
bus-voltage PIs of both schemes and the conventional current-sharing PI)
exchanges its datasets and updates once per secondary period, seeing the
neighbor one secondary period old.  Runs are deterministic: identical
scenarios produce bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import expm

from .control import (CascadeController, CascadeScheme, CommChannel,
                      ConventionalController, ConventionalScheme, Measurement,
                      compute_weights)
from .grid import GridConfig


class SimulationError(Exception):
    pass


class SimulationDiverged(SimulationError):
    """The state left the finite range; reported with the offending time."""

    def __init__(self, time: float):
        super().__init__(f"simulation diverged (non-finite state) at t = {time:.6f} s")
        self.time = time


@dataclass(frozen=True)
class LoadProfile:
    """Timed steps of the total load power (watt), strictly increasing times."""

    steps: tuple[tuple[float, float], ...]

    def __post_init__(self):
        times = [t for t, _ in self.steps]
        if any(not (math.isfinite(t) and math.isfinite(p)) for t, p in self.steps):
            raise SimulationError("event times and powers must be finite")
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise SimulationError("event times must be strictly increasing")
        if any(p < 0 for _, p in self.steps):
            raise SimulationError("load powers must be >= 0")

    @property
    def last_event_time(self) -> float:
        return self.steps[-1][0] if self.steps else 0.0


Scheme = Union[ConventionalScheme, CascadeScheme]


@dataclass(frozen=True)
class Scenario:
    grid: GridConfig
    scheme: Scheme
    load: LoadProfile
    activation_time: float
    duration: float
    plant_dt: float = 1e-4
    control_dt: float = 1e-3
    secondary_dt: float = 0.02
    demand: float = 0.0

    def __post_init__(self):
        if self.plant_dt <= 0 or self.control_dt <= 0 or self.secondary_dt <= 0:
            raise SimulationError("time steps must be positive")
        if self.plant_dt > self.control_dt:
            raise SimulationError("plant_dt must not exceed control_dt")
        if self.control_dt > self.secondary_dt:
            raise SimulationError("control_dt must not exceed secondary_dt")
        if self.duration <= self.load.last_event_time:
            raise SimulationError("duration must exceed the last load event")
        n_sub = self.control_dt / self.plant_dt
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise SimulationError("control_dt must be a multiple of plant_dt")
        n_x = self.secondary_dt / self.control_dt
        if abs(n_x - round(n_x)) > 1e-9:
            raise SimulationError("secondary_dt must be a multiple of control_dt")


@dataclass(frozen=True)
class SimResult:
    """Time series of one run.  All series share the plant time grid."""

    time: np.ndarray                 # (n,)
    power: np.ndarray                # (n, 2)  exchanged power deviations, W
    current: np.ndarray              # (n, 2)  cable currents, A (power over nominal voltage)
    terminal_voltage: np.ndarray     # (n, 2)  converter terminal deviations, V
    bus_voltage: np.ndarray          # (n,)    load-node voltage deviation, V
    regulated_voltage: np.ndarray    # (n,)    mean terminal deviation, V
    voltage_reference: np.ndarray    # (n, 2)  commanded reference deviations, V
    weights: tuple[float, ...]
    events: tuple[tuple[float, float], ...]
    activation_time: float

    def window(self, start: float, length: float) -> np.ndarray:
        """Boolean mask selecting start < t <= start+length."""
        return (self.time > start + 1e-12) & (self.time <= start + length + 1e-12)


def _plant_matrices(grid: GridConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """State equations for x = [V1, V2, I1, I2], inputs u = [V1*, V2*].

    Between load events the current sum is invariant, the bus voltage is the
    algebraic combination c_vg @ x, and each cable current relaxes toward its
    own source voltage against the bus.
    """
    c1, c2 = grid.converters[0], grid.converters[1]
    r1, l1 = c1.cable.resistance, c1.cable.inductance
    r2, l2 = c2.cable.resistance, c2.cable.inductance
    a = np.zeros((4, 4))
    b = np.zeros((4, 2))
    a[0, 0] = -1.0 / c1.voltage_loop_tau
    b[0, 0] = 1.0 / c1.voltage_loop_tau
    a[1, 1] = -1.0 / c2.voltage_loop_tau
    b[1, 1] = 1.0 / c2.voltage_loop_tau
    lsum = l1 + l2
    c_vg = np.array([l2 / lsum, l1 / lsum, -r1 * l2 / lsum, -r2 * l1 / lsum])
    a[2] = (np.array([1.0, 0.0, -r1, 0.0]) - c_vg) / l1
    a[3] = (np.array([0.0, 1.0, 0.0, -r2]) - c_vg) / l2
    return a, b, c_vg


def _discretize(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    n, m = b.shape
    big = np.zeros((n + m, n + m))
    big[:n, :n] = a * dt
    big[:n, n:] = b * dt
    e = expm(big)
    return e[:n, :n], e[:n, n:]


def _make_controllers(scenario: Scenario):
    if isinstance(scenario.scheme, CascadeScheme):
        return [CascadeController(scenario.scheme, scenario.grid, i,
                                  demand=scenario.demand) for i in range(2)]
    return [ConventionalController(scenario.scheme, scenario.grid, i)
            for i in range(2)]


def run(scenario: Scenario) -> SimResult:
    """Simulate one scenario; raises :class:`SimulationDiverged` on blow-up."""
    grid = scenario.grid
    if len(grid.converters) != 2:
        raise SimulationError("the simulation engine models exactly 2 converters")
    v_nom = grid.nominal_bus_voltage
    l1 = grid.converters[0].cable.inductance
    l2 = grid.converters[1].cable.inductance
    a, b, c_vg = _plant_matrices(grid)
    ad, bd = _discretize(a, b, scenario.plant_dt)

    n_sub = int(round(scenario.control_dt / scenario.plant_dt))
    n_sec = int(round(scenario.secondary_dt / scenario.control_dt))
    n_ctl = int(round(scenario.duration / scenario.control_dt))
    n_rows = n_ctl * n_sub

    units = _make_controllers(scenario)
    telemetry = CommChannel(period=scenario.control_dt)
    coordination = CommChannel(period=scenario.secondary_dt)

    time_grid = np.arange(1, n_rows + 1) * scenario.plant_dt
    term = np.empty((n_rows, 2))
    curr = np.empty((n_rows, 2))
    bus = np.empty(n_rows)
    refs = np.empty((n_rows, 2))

    x = np.zeros(4)
    load_now = 0.0
    pending = list(scenario.load.steps)
    activated = False
    row = 0

    for k in range(n_ctl):
        t = k * scenario.control_dt
        while pending and t >= pending[0][0] - 1e-12:
            _, new_load = pending.pop(0)
            jump = (new_load - load_now) / v_nom
            x[2] += l2 / (l1 + l2) * jump   # inductive divider split
            x[3] += l1 / (l1 + l2) * jump
            load_now = new_load

        meas = [Measurement(power=v_nom * x[2], current=x[2], terminal_voltage=x[0]),
                Measurement(power=v_nom * x[3], current=x[3], terminal_voltage=x[1])]

        if not activated and t >= scenario.activation_time - 1e-12:
            for unit in units:
                unit.activate()
            activated = True

        # publish both snapshots before reading so each side sees the
        # neighbor's previous-period value (symmetric one-period staleness)
        for i in range(2):
            telemetry.publish(i, meas[i])
        secondary = (k % n_sec == 0)
        if secondary:
            for i in range(2):
                coordination.publish(i, meas[i])
        u = np.array([
            units[i].step(meas[i], telemetry.neighbor_view(i),
                          coordination.neighbor_view(i) if secondary else None,
                          scenario.control_dt, scenario.secondary_dt)
            for i in range(2)])

        for _ in range(n_sub):
            x = ad @ x + bd @ u
            term[row] = x[0:2]
            curr[row] = x[2:4]
            bus[row] = c_vg @ x
            refs[row] = u
            row += 1
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(time_grid[row - 1])

    weights = compute_weights(grid)
    return SimResult(
        time=time_grid,
        power=v_nom * curr,
        current=curr,
        terminal_voltage=term,
        bus_voltage=bus,
        regulated_voltage=term.mean(axis=1),
        voltage_reference=refs,
        weights=weights,
        events=scenario.load.steps,
        activation_time=scenario.activation_time,
    )


# ---------------------------------------------------------------------------
# transient scoring

DEFAULT_ITAE_WINDOW = 2.0


@dataclass(frozen=True)
class ItaeReport:
    itae_v: float        # V * s^2
    itae_i: float        # A * s^2
    window_start: float
    window_length: float

    def __post_init__(self):
        if self.itae_v < 0 or self.itae_i < 0:
            raise SimulationError("ITAE scores are non-negative by construction")


def _window_slice(result: SimResult, start: float, length: float) -> np.ndarray:
    if start + length > result.time[-1] + 1e-12:
        raise SimulationError(
            f"window [{start:g}, {start + length:g}] exceeds the simulated span")
    mask = result.window(start, length)
    if np.count_nonzero(mask) < 2:
        raise SimulationError(
            f"window [{start:g}, {start + length:g}] holds fewer than 2 samples")
    return mask


def itae_voltage(result: SimResult, window_start: float,
                 window_length: float = DEFAULT_ITAE_WINDOW) -> float:
    """Integral of t * |mean terminal-voltage deviation| over the window.

    Time is measured from the window start; the integrand uses the mean of
    the two converter terminal voltages against the nominal reference.
    """
    m = _window_slice(result, window_start, window_length)
    t = result.time[m] - window_start
    err = np.abs(result.regulated_voltage[m])
    return float(np.trapezoid(t * err, t))


def itae_current(result: SimResult, window_start: float,
                 window_length: float = DEFAULT_ITAE_WINDOW) -> float:
    """Integral of t * (|I_ref1 - I1| + |I_ref2 - I2|) over the window.

    Current references are the rated-power shares of the total measured
    current at each sample.
    """
    m = _window_slice(result, window_start, window_length)
    t = result.time[m] - window_start
    total = result.current[m].sum(axis=1)
    err = sum(np.abs(result.weights[i] * total - result.current[m][:, i])
              for i in range(2))
    return float(np.trapezoid(t * err, t))


def settling_time(times: np.ndarray, series: np.ndarray, target: float,
                  band_percent: float = 2.0,
                  band_floor: float = 0.0) -> float:
    """Last time the signal exits the band around the target, from the window start.

    The band is ``band_percent`` of the largest deviation seen in the window,
    raised to ``band_floor`` when given (guards signals that never deviate
    meaningfully).  Returns ``math.inf`` when the signal is still outside the
    band at the final sample (not settled).
    """
    if len(series) == 0:
        raise SimulationError("settling_time needs a nonempty series")
    err = np.abs(np.asarray(series) - target)
    peak = float(err.max())
    band = max(band_percent / 100.0 * peak, band_floor)
    if band == 0.0:
        return 0.0
    outside = np.nonzero(err > band)[0]
    if len(outside) == 0:
        return 0.0
    if outside[-1] == len(err) - 1:
        return math.inf
    return float(times[outside[-1] + 1])


def voltage_settling(result: SimResult, window_start: float,
                     window_length: float, band_percent: float = 2.0,
                     band_floor: float = 0.05) -> float:
    """Settling of the regulated (mean terminal) voltage after an event.

    The default absolute floor of 0.05 V matches the steady-state voltage band
    the comparison uses, so signals that never leave it count as settled at 0.
    """
    m = _window_slice(result, window_start, window_length)
    times = result.time[m] - window_start
    series = result.regulated_voltage[m]
    return settling_time(times, series, 0.0, band_percent, band_floor)
