"""Frequency-domain PI synthesis.

Given a plant, a target gain-crossover frequency, and a target phase margin,
the unique PI controller satisfying both constraints places the loop response
at exactly 1 angle (margin - 180 deg) at the crossover.  A PI can only add
phase in (-90, 0] degrees, so specs demanding phase lift are rejected rather
than approximated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .control import PiGains
from .lti import (NoCrossoverError, TransferFunction, analytic_phase,
                  gain_crossover, phase_margin, tf, tf_series)


class InfeasibleDesignError(Exception):
    """The requested margin is outside what a PI can deliver on this plant."""

    def __init__(self, message: str, achievable_min: float, achievable_max: float):
        super().__init__(message)
        self.achievable_min = achievable_min
        self.achievable_max = achievable_max


@dataclass(frozen=True)
class TuningSpec:
    crossover_omega: float  # rad/s
    phase_margin: float     # degrees

    def __post_init__(self):
        if self.crossover_omega <= 0:
            raise ValueError("crossover frequency must be positive")
        if not 0 < self.phase_margin < 180:
            raise ValueError("phase margin must lie in (0, 180) degrees")


@dataclass(frozen=True)
class TunedController:
    gains: PiGains
    achieved_crossover: float
    achieved_margin: float


@dataclass(frozen=True)
class DesignReport:
    """Verification of a PI design against its spec."""

    ok: bool
    crossover: Optional[float]
    margin: Optional[float]
    crossover_delta: Optional[float]
    margin_delta: Optional[float]
    reason: str = ""


def pi_tf(gains: PiGains) -> TransferFunction:
    """PI controller kp + ki/s as a transfer function (pure gain when ki = 0)."""
    if gains.ki == 0.0:
        return tf([gains.kp], [1.0])
    return tf([gains.ki, gains.kp], [0.0, 1.0])


def design_pi(plant: TransferFunction, spec: TuningSpec) -> TunedController:
    """Solve C(jwc)*G(jwc) = 1 at angle (margin - 180 deg) for C = kp + ki/s.

    The required controller phase theta must lie in (-90, 0] degrees; then
    |C| = 1/|G(jwc)|, kp = |C| cos(theta), ki = -wc |C| sin(theta).
    """
    wc = spec.crossover_omega
    g = plant(1j * wc)
    if not (math.isfinite(abs(g)) and abs(g) > 0):
        raise InfeasibleDesignError(
            f"plant response at {wc:g} rad/s is zero or singular", 0.0, 0.0)
    g_phase = math.degrees(analytic_phase(plant, wc))
    theta = (-180.0 + spec.phase_margin) - g_phase
    if not -90.0 < theta <= 0.0:
        lo, hi = 90.0 + g_phase, 180.0 + g_phase
        raise InfeasibleDesignError(
            f"requested margin {spec.phase_margin:g} deg needs controller phase "
            f"{theta:.2f} deg, outside the PI range (-90, 0]; achievable margins "
            f"on this plant are ({lo:.2f}, {hi:.2f}] deg", lo, hi)
    mag = 1.0 / abs(g)
    th = math.radians(theta)
    gains = PiGains(kp=mag * math.cos(th), ki=-wc * mag * math.sin(th))
    report = verify_design(plant, gains, spec)
    return TunedController(gains=gains,
                           achieved_crossover=report.crossover,
                           achieved_margin=report.margin)


def verify_design(plant: TransferFunction, gains: PiGains,
                  spec: TuningSpec) -> DesignReport:
    """Recompute crossover and margin of C*G and report deltas against the spec."""
    loop = tf_series(pi_tf(gains), plant)
    try:
        wc = gain_crossover(loop)
    except NoCrossoverError as exc:
        return DesignReport(ok=False, crossover=None, margin=None,
                            crossover_delta=None, margin_delta=None,
                            reason=str(exc))
    pm = phase_margin(loop)
    return DesignReport(ok=True, crossover=wc, margin=pm,
                        crossover_delta=wc - spec.crossover_omega,
                        margin_delta=pm - spec.phase_margin)
