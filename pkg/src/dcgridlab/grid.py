"""Small-signal model of a two-source DC microgrid.

Two converter-interfaced sources feed a common bus through resistive-inductive
cables.  Each converter's closed voltage loop is abstracted to a first-order
lag.  Around an operating point, the bus voltage deviation splits by
superposition into a source-voltage part (an impedance divider) and a
load-change part; power exchanged by each source follows from the cable
impedance.  These relations supply the open-loop plants used for controller
design.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lti import Polynomial, TransferFunction, tf, tf_feedback, tf_series


class GridModelError(Exception):
    """Invalid grid description or unsupported topology."""


@dataclass(frozen=True)
class CableParams:
    """Series cable impedance R + L*s."""

    resistance: float  # ohm
    inductance: float  # henry

    def __post_init__(self):
        if self.resistance <= 0 or self.inductance <= 0:
            raise GridModelError("cable resistance and inductance must be positive")

    def impedance(self) -> Polynomial:
        return Polynomial([self.resistance, self.inductance])


@dataclass(frozen=True)
class ConverterParams:
    """One source: power rating, closed voltage-loop lag, and its cable."""

    rated_power: float      # watt
    voltage_loop_tau: float  # second
    cable: CableParams

    def __post_init__(self):
        if self.rated_power <= 0:
            raise GridModelError("rated power must be positive")
        if self.voltage_loop_tau <= 0:
            raise GridModelError("voltage loop time constant must be positive")


@dataclass(frozen=True)
class GridConfig:
    """The microgrid: ordered converters plus nominal bus voltage."""

    converters: tuple[ConverterParams, ...]
    nominal_bus_voltage: float    # volt
    fixed_voltage_reference: float  # volt, primary-level setpoint

    def __post_init__(self):
        if self.nominal_bus_voltage <= 0:
            raise GridModelError("nominal bus voltage must be positive")
        if len(self.converters) < 2:
            raise GridModelError("at least two converters are required")

    @property
    def rated_powers(self) -> tuple[float, ...]:
        return tuple(c.rated_power for c in self.converters)


# Bench defaults: 400 V bus, 4 kW + 2 kW converters, 0.5 ohm / 3 mH cables,
# 5 ms converter voltage loops.
def default_grid() -> GridConfig:
    cable = CableParams(resistance=0.5, inductance=3e-3)
    return GridConfig(
        converters=(
            ConverterParams(rated_power=4000.0, voltage_loop_tau=0.005, cable=cable),
            ConverterParams(rated_power=2000.0, voltage_loop_tau=0.005, cable=cable),
        ),
        nominal_bus_voltage=400.0,
        fixed_voltage_reference=400.0,
    )


def _require_two(grid: GridConfig) -> None:
    # The divider and superposition relations below are two-source algebra.
    if len(grid.converters) != 2:
        raise GridModelError(
            f"this relation is defined for exactly 2 converters, got {len(grid.converters)}")


def _check_index(grid: GridConfig, i: int) -> None:
    if not 0 <= i < len(grid.converters):
        raise GridModelError(f"converter index {i} out of range")


def converter_voltage_tf(conv: ConverterParams) -> TransferFunction:
    """Closed voltage loop of one converter, reduced to 1/(1 + tau*s)."""
    return tf([1.0], [1.0, conv.voltage_loop_tau])


def power_plant_tf(grid: GridConfig, i: int) -> TransferFunction:
    """Open-loop power plant of converter i against a stiff bus.

    Output power deviation per unit of voltage-reference deviation:
    Gv_i(s) * Vg_nominal / (R_i + L_i*s).
    """
    _check_index(grid, i)
    conv = grid.converters[i]
    gv = converter_voltage_tf(conv)
    cable_adm = tf([grid.nominal_bus_voltage],
                   [conv.cable.resistance, conv.cable.inductance])
    return tf_series(gv, cable_adm)


def bus_voltage_source_weights(grid: GridConfig) -> tuple[TransferFunction, TransferFunction]:
    """Impedance-divider weights mapping source-voltage deviations to the bus.

    dVg = W1(s)*dV1 + W2(s)*dV2 with W1 = Z2/(Z1+Z2) and W2 = Z1/(Z1+Z2);
    the weights sum to one at every frequency.
    """
    _require_two(grid)
    z1 = grid.converters[0].cable.impedance()
    z2 = grid.converters[1].cable.impedance()
    zsum = z1 + z2
    return (TransferFunction(z2, zsum), TransferFunction(z1, zsum))


def bus_voltage_load_response(grid: GridConfig) -> TransferFunction:
    """Bus-voltage deviation per watt of load-power increase (negative at DC).

    dVg/dP = -(1/Vg_nominal) * Z1*Z2 / (Z1 + Z2).
    """
    _require_two(grid)
    z1 = grid.converters[0].cable.impedance()
    z2 = grid.converters[1].cable.impedance()
    num = (z1 * z2).scaled(-1.0 / grid.nominal_bus_voltage)
    return TransferFunction(num, z1 + z2)


@dataclass(frozen=True)
class BusVoltageModel:
    """Three-input linear block for the bus voltage deviation.

    dVg = source_weights[0]*dV1 + source_weights[1]*dV2 + load_response*dP.
    """

    source_weights: tuple[TransferFunction, TransferFunction]
    load_response: TransferFunction

    def response(self, s: complex, dv1: complex, dv2: complex, dp: complex) -> complex:
        w1, w2 = self.source_weights
        return w1(s) * dv1 + w2(s) * dv2 + self.load_response(s) * dp


def total_bus_voltage(grid: GridConfig) -> BusVoltageModel:
    """Superposition of the source-divider and load-change contributions."""
    return BusVoltageModel(bus_voltage_source_weights(grid),
                           bus_voltage_load_response(grid))


def power_exchange_tfs(grid: GridConfig) -> tuple[TransferFunction, TransferFunction]:
    """Per-converter admittance from (dV_i - dVg) to exchanged power dP_i.

    dP_i = (dV_i - dVg) * Vg_nominal / (R_i + L_i*s).
    """
    _require_two(grid)
    out = []
    for conv in grid.converters:
        out.append(tf([grid.nominal_bus_voltage],
                      [conv.cable.resistance, conv.cable.inductance]))
    return out[0], out[1]


OUTER_PLANT_MODES = ("as-written", "closed-inner")


def voltage_loop_plant_tf(grid: GridConfig, i: int, power_pi,
                          mode: str = "as-written") -> TransferFunction:
    """Open-loop plant of the bus-voltage (outer) loop for converter i.

    The outer loop commands a power-reference change; acting alone, converter
    i moves the bus through its power PI, its voltage loop, and the impedance
    divider against the other cable:

    - ``as-written``: C_P(s) * Gv_i(s) * Z_j/(Z_i+Z_j), the decentralized
      view with the inner power feedback left open.  This mode is the default
      and the one the shipped gains are designed against.
    - ``closed-inner``: the same path with the inner power loop closed before
      the divider, C_P*Gv_i/(1 + C_P*G_power,i) * Z_j/(Z_i+Z_j).
    """
    _require_two(grid)
    _check_index(grid, i)
    if mode not in OUTER_PLANT_MODES:
        raise GridModelError(f"unknown outer-plant mode {mode!r}; pick one of {OUTER_PLANT_MODES}")
    conv = grid.converters[i]
    other = grid.converters[1 - i]
    zi = conv.cable.impedance()
    zj = other.cable.impedance()
    divider = TransferFunction(zj, zi + zj)
    c_p = tf([power_pi.ki, power_pi.kp], [0.0, 1.0]) if power_pi.ki != 0 \
        else tf([power_pi.kp], [1.0])
    gv = converter_voltage_tf(conv)
    if mode == "as-written":
        return tf_series(tf_series(c_p, gv), divider)
    # closed-inner: wrap the power feedback around C_P*Gv before the divider
    forward = tf_series(c_p, gv)
    power_feedback = tf([grid.nominal_bus_voltage],
                        [conv.cable.resistance, conv.cable.inductance])
    inner = tf_feedback(forward, power_feedback)
    return tf_series(inner, divider)
