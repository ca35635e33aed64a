"""Rational LTI building blocks: polynomials, transfer functions, frequency
response, pole extraction, and state-space realization.

Everything lives in the continuous (s) domain.  Polynomial coefficients are
stored in ascending powers of s.  All types are immutable; all operations are
pure functions, so they are safe to evaluate concurrently.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm


class LtiError(Exception):
    """Base error for LTI algebra failures."""


class ImproperSystemError(LtiError):
    """Raised when a state-space realization of an improper system is requested."""


class DegenerateLoopError(LtiError):
    """Raised when a feedback interconnection has an identically zero denominator."""


class NoCrossoverError(LtiError):
    """Raised when no unity-gain crossing exists on the searched frequency range."""

    def __init__(self, message: str, omega_min: float, omega_max: float):
        super().__init__(message)
        self.omega_min = omega_min
        self.omega_max = omega_max


# Default search grid for crossover hunting: brackets every time constant the
# bench produces (converter loops ~5 ms, cables ~6 ms, secondary loops ~0.1 s).
CROSSOVER_OMEGA_MIN = 1e-2
CROSSOVER_OMEGA_MAX = 1e5
CROSSOVER_GRID_POINTS = 400


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    """Drop high-order zero coefficients; keep at least one entry."""
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in s, coefficients in ascending powers."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float]):
        if len(coeffs) == 0:
            raise ValueError("polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, s: complex) -> complex:
        acc = 0.0 + 0.0j
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return poly_mul(self, other)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0.0] * (n - len(other.coeffs))
        return Polynomial([x + y for x, y in zip(a, b)])

    def scaled(self, k: float) -> "Polynomial":
        return Polynomial([k * c for c in self.coeffs])

    def roots(self) -> np.ndarray:
        """All roots, via companion-matrix eigenvalues plus one Newton polish."""
        if self.degree == 0:
            return np.array([], dtype=complex)
        r = np.roots(self.coeffs[::-1])
        d = Polynomial(tuple(i * c for i, c in enumerate(self.coeffs))[1:] or (0.0,))
        polished = []
        for root in r:
            dv = d(root)
            if abs(dv) > 0.0:
                step = self(root) / dv
                if np.isfinite(step):
                    root = root - step
            polished.append(root)
        return np.array(polished, dtype=complex)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    """Polynomial product; coefficients are the convolution of the inputs."""
    return Polynomial(np.convolve(a.coeffs, b.coeffs))


def _deflate(poly: Polynomial, roots: list[complex]) -> Optional[Polynomial]:
    """Divide out the factor carrying ``roots``; None when it is not real."""
    factor = np.atleast_1d(np.poly(np.array(roots)))
    if np.max(np.abs(factor.imag)) > 1e-9 * np.max(np.abs(factor.real)):
        return None  # the matched set is not conjugate-closed
    quotient, _ = np.polydiv(np.array(poly.coeffs[::-1]), factor.real)
    return Polynomial(np.atleast_1d(quotient)[::-1])


def cancel_common_factors(num: Polynomial, den: Polynomial,
                          rtol: float = 1e-9) -> tuple[Polynomial, Polynomial]:
    """Cancel numerator/denominator roots that agree within ``rtol`` relative.

    Cancellation is deliberately strict: near-but-not-equal pole/zero pairs are
    kept so near-unstable hidden modes stay visible.  The surviving factors are
    obtained by deflating the original coefficients (never by rebuilding them
    from computed roots), so multiple roots in the kept part stay accurate.
    """
    if num.is_zero or num.degree == 0 or den.degree == 0:
        return num, den
    zd = list(den.roots())
    cancelled_n: list[complex] = []
    cancelled_d: list[complex] = []
    for z in num.roots():
        hit = None
        for i, p in enumerate(zd):
            if abs(z - p) <= rtol * max(1.0, abs(z), abs(p)):
                hit = i
                break
        if hit is not None:
            cancelled_n.append(z)
            cancelled_d.append(zd.pop(hit))
    if not cancelled_n:
        return num, den
    new_num = _deflate(num, cancelled_n)
    new_den = _deflate(den, cancelled_d)
    if new_num is None or new_den is None:
        return num, den
    return new_num, new_den


@dataclass(frozen=True)
class TransferFunction:
    """Rational transfer function num(s)/den(s)."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if self.den.is_zero:
            raise LtiError("denominator is identically zero")

    @property
    def is_proper(self) -> bool:
        return self.num.degree <= self.den.degree or self.num.is_zero

    def __call__(self, s: complex) -> complex:
        return self.num(s) / self.den(s)

    def dc_gain(self) -> float:
        d = self.den(0.0)
        if d == 0:
            return math.inf if self.num(0.0) != 0 else math.nan
        return (self.num(0.0) / d).real

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return tf_series(self, other)


def tf(num: Sequence[float], den: Sequence[float]) -> TransferFunction:
    """Build a transfer function from ascending-power coefficient lists."""
    return TransferFunction(Polynomial(num), Polynomial(den))


def tf_constant(k: float) -> TransferFunction:
    return tf([k], [1.0])


def tf_series(g1: TransferFunction, g2: TransferFunction) -> TransferFunction:
    """Series (cascade) interconnection g1*g2 with exact-match factor cleanup."""
    num, den = cancel_common_factors(g1.num * g2.num, g1.den * g2.den)
    return TransferFunction(num, den)


def tf_feedback(forward: TransferFunction,
                feedback: TransferFunction) -> TransferFunction:
    """Closed loop forward/(1 + forward*feedback) as a reduced rational function."""
    num = forward.num * feedback.den
    den = forward.den * feedback.den + forward.num * feedback.num
    if den.is_zero:
        raise DegenerateLoopError("algebraic loop: closed-loop denominator is zero")
    num, den = cancel_common_factors(num, den)
    return TransferFunction(num, den)


def poles(g: TransferFunction) -> list[complex]:
    """Denominator roots.  Empty for a constant denominator."""
    return list(g.den.roots())


def zeros(g: TransferFunction) -> list[complex]:
    return list(g.num.roots())


# ---------------------------------------------------------------------------
# frequency response


@dataclass(frozen=True)
class FrequencyPoint:
    """One sample of a frequency response (phase unwrapped, in degrees)."""

    omega: float
    magnitude_db: float
    phase_deg: float
    at_pole: bool = field(default=False)


def _branch_angle(root: complex, w: float) -> float:
    # Continuous-in-w branch of angle(jw - root).  Left-half-plane and
    # imaginary-axis roots use the principal value (continuous for w > 0
    # except exactly at an imaginary-axis root); right-half-plane roots use
    # the branch that starts at pi when w -> 0.
    if root.real > 0.0:
        return math.pi + cmath.phase(root - 1j * w)
    return cmath.phase(1j * w - root)


def analytic_phase(g: TransferFunction, omega: float) -> float:
    """Continuous (unwrapped-from-DC) phase of g(jw), in radians.

    Computed as the sum of per-root branch angles, so it carries the absolute
    phase a cumulative unwrap would only reach with a sufficiently fine grid.
    """
    lead = g.num.coeffs[-1] / g.den.coeffs[-1]
    phase = 0.0 if lead > 0 else -math.pi
    for z in g.num.roots():
        phase += _branch_angle(z, omega)
    for p in g.den.roots():
        phase -= _branch_angle(p, omega)
    return phase


def freq_response(g: TransferFunction, omegas: Sequence[float]) -> list[FrequencyPoint]:
    """Magnitude (dB) and unwrapped phase (deg) at strictly positive frequencies.

    Phase is cumulatively unwrapped along the grid and anchored at the lowest
    frequency with the analytic phase of g there, so margins read from the
    result use absolute phase.  Evaluation on top of an imaginary-axis pole
    yields a flagged point instead of a crash.
    """
    w = np.asarray(list(omegas), dtype=float)
    if len(w) == 0:
        return []
    if np.any(w <= 0) or np.any(np.diff(w) < 0):
        raise ValueError("frequencies must be strictly positive and ascending")
    den_scale = max(abs(c) for c in g.den.coeffs)
    resp = np.empty(len(w), dtype=complex)
    flagged = np.zeros(len(w), dtype=bool)
    for i, wi in enumerate(w):
        dv = g.den(1j * wi)
        if abs(dv) < 1e-300 * max(1.0, den_scale):
            flagged[i] = True
            resp[i] = complex(math.inf, 0.0)
        else:
            resp[i] = g.num(1j * wi) / dv
    mag_db = np.where(flagged, math.inf, 20.0 * np.log10(np.maximum(np.abs(resp), 1e-300)))
    raw = np.angle(resp)
    raw[flagged] = 0.0
    unwrapped = np.unwrap(raw)
    unwrapped += analytic_phase(g, w[0]) - unwrapped[0]
    return [
        FrequencyPoint(float(wi), float(m), float(math.degrees(p)), bool(f))
        for wi, m, p, f in zip(w, mag_db, unwrapped, flagged)
    ]


def _log_grid(omega_min: float, omega_max: float, n: int) -> np.ndarray:
    return np.logspace(math.log10(omega_min), math.log10(omega_max), n)


def _bisect_db(g: TransferFunction, level_db: float, wa: float, wb: float) -> float:
    """Bisection on log-frequency for 20*log10|g(jw)| == level_db."""
    fa = 20.0 * math.log10(abs(g(1j * wa))) - level_db
    la, lb = math.log(wa), math.log(wb)
    for _ in range(200):
        lm = 0.5 * (la + lb)
        wm = math.exp(lm)
        fm = 20.0 * math.log10(abs(g(1j * wm))) - level_db
        if abs(fm) < 1e-9:
            return wm
        if (fa < 0) == (fm < 0):
            la, fa = lm, fm
        else:
            lb = lm
    return math.exp(0.5 * (la + lb))


def gain_crossover(g: TransferFunction,
                   omega_min: float = CROSSOVER_OMEGA_MIN,
                   omega_max: float = CROSSOVER_OMEGA_MAX) -> float:
    """Lowest frequency where |g(jw)| crosses unity (0 dB).

    A log grid brackets the crossing, bisection refines it to better than
    1e-6 dB.  Raises :class:`NoCrossoverError` when the magnitude never
    crosses 0 dB on the range.
    """
    grid = _log_grid(omega_min, omega_max, CROSSOVER_GRID_POINTS)
    db = np.array([20.0 * math.log10(max(abs(g(1j * w)), 1e-300)) for w in grid])
    sign = np.sign(db)
    for i in range(len(grid) - 1):
        if sign[i] == 0:
            return float(grid[i])
        if sign[i] != sign[i + 1]:
            return float(_bisect_db(g, 0.0, grid[i], grid[i + 1]))
    raise NoCrossoverError(
        f"no 0 dB crossing of |g(jw)| on [{omega_min:g}, {omega_max:g}] rad/s",
        omega_min, omega_max)


def bandwidth_3db(g: TransferFunction,
                  omega_min: float = CROSSOVER_OMEGA_MIN,
                  omega_max: float = CROSSOVER_OMEGA_MAX) -> float:
    """Lowest frequency where the gain has fallen 3 dB below the DC gain."""
    dc = g.dc_gain()
    if not math.isfinite(dc) or dc == 0.0:
        raise LtiError("3 dB bandwidth needs a finite nonzero DC gain")
    level = 20.0 * math.log10(abs(dc)) - 3.0
    grid = _log_grid(omega_min, omega_max, CROSSOVER_GRID_POINTS)
    db = np.array([20.0 * math.log10(max(abs(g(1j * w)), 1e-300)) for w in grid])
    above = db - level
    for i in range(len(grid) - 1):
        if above[i] >= 0 > above[i + 1]:
            return float(_bisect_db(g, level, grid[i], grid[i + 1]))
    raise NoCrossoverError(
        f"gain never falls 3 dB below DC on [{omega_min:g}, {omega_max:g}] rad/s",
        omega_min, omega_max)


def phase_margin(g: TransferFunction) -> float:
    """180 degrees plus the unwrapped open-loop phase at the gain crossover."""
    wc = gain_crossover(g)
    return 180.0 + math.degrees(analytic_phase(g, wc))


# ---------------------------------------------------------------------------
# state-space realization


@dataclass(frozen=True)
class StateSpace:
    """Controllable-canonical realization (a: n x n, b: n x 1, c: 1 x n, d scalar)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def response(self, s: complex) -> complex:
        n = self.order
        if n == 0:
            return complex(self.d)
        m = s * np.eye(n) - self.a
        x = np.linalg.solve(m, self.b)
        return complex((self.c @ x)[0, 0] + self.d)


def realize(g: TransferFunction) -> StateSpace:
    """Controllable-canonical state-space realization of a proper system."""
    if not g.is_proper:
        raise ImproperSystemError(
            f"cannot realize improper system (num degree {g.num.degree} > "
            f"den degree {g.den.degree})")
    den = g.den.coeffs
    n = len(den) - 1
    lead = den[-1]
    a_norm = [c / lead for c in den[:-1]]          # monic denominator
    num_p = list(g.num.coeffs) + [0.0] * (n + 1 - len(g.num.coeffs))
    num_n = [c / lead for c in num_p]
    d = num_n[n]
    c_row = [num_n[i] - d * a_norm[i] for i in range(n)]
    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), float(d))
    a = np.zeros((n, n))
    a[:-1, 1:] = np.eye(n - 1)
    a[-1, :] = [-x for x in a_norm]
    b = np.zeros((n, 1))
    b[-1, 0] = 1.0
    c = np.array([c_row])
    return StateSpace(a, b, c, float(d))


def step_response(ss: StateSpace, dt: float, n_steps: int) -> np.ndarray:
    """Unit-step output samples at t = dt..n_steps*dt via exact discretization."""
    n = ss.order
    if n == 0:
        return np.full(n_steps, ss.d)
    m = np.zeros((n + 1, n + 1))
    m[:n, :n] = ss.a * dt
    m[:n, n:] = ss.b * dt
    e = expm(m)
    ad, bd = e[:n, :n], e[:n, n:]
    x = np.zeros((n, 1))
    out = np.empty(n_steps)
    for k in range(n_steps):
        x = ad @ x + bd
        out[k] = (ss.c @ x)[0, 0] + ss.d
    return out
