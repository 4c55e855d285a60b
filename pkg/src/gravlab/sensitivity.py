"""Gravimeter sensitivity function and scale factor.

The four-pulse sequence produces a piecewise response g(t) to phase
jumps: a smooth ramp up over the first pulse, a plateau at +1 during the
first separation time, a ramp back to zero, a dead window during the
free evolution, then the mirrored negative lobe. The scale factor is the
time-weighted integral of that response times the effective wavevector
and converts an acceleration into an interferometer phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, NumericalError
from .pulses import PulseShape, pulse_sensitivity

QUAD_ABS_TOL = 1e-12  # seconds; per-segment quadrature tolerance


@dataclass(frozen=True)
class SequenceTiming:
    """Epochs of one gravimeter sequence (seconds).

    pulse_s:          duration of each of the four Raman pulses
    separation_s:     wait between the pulses of a pair
    free_evolution_s: wait between the two pairs (the T that is scanned)
    start_s:          absolute start time of the sequence
    """

    pulse_s: float = 60e-6
    separation_s: float = 77e-6
    free_evolution_s: float = 455e-6
    start_s: float = 0.0

    def __post_init__(self):
        if self.pulse_s <= 0 or self.separation_s <= 0 or self.free_evolution_s <= 0:
            raise ConfigError("all sequence durations must be > 0")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """The 8 epoch edges, strictly increasing."""
        tau, sep, free = self.pulse_s, self.separation_s, self.free_evolution_s
        offs = (0.0, tau, sep, tau, free, tau, sep, tau)
        edges = self.start_s + np.cumsum(offs)
        return tuple(float(t) for t in edges)

    @property
    def total_s(self) -> float:
        return self.breakpoints[-1] - self.start_s


@dataclass(frozen=True)
class PhysicalConstants:
    """Effective two-photon wavevector of the Raman transition."""

    # two counter-propagating photons on the Rb D2 line, 4*pi/780.241 nm
    k_eff_per_m: float = 1.61057e7

    def __post_init__(self):
        if self.k_eff_per_m <= 0:
            raise ConfigError("k_eff_per_m must be > 0")


def gravity_sensitivity(timing: SequenceTiming, t: float) -> float:
    """Piecewise sequence sensitivity g(t); zero outside the sequence."""
    b = timing.breakpoints
    if t < b[0] or t > b[7]:
        return 0.0
    shape = PulseShape(kind="blackman", duration_s=timing.pulse_s)

    def ramp(edge):
        # clamp the segment-local time: breakpoint arithmetic can leave
        # ~1 ulp of dust past the pulse support
        local = min(max(t - edge, 0.0), shape.duration_s)
        return pulse_sensitivity(shape, local)

    if t <= b[1]:
        return ramp(b[0])
    if t <= b[2]:
        return 1.0
    if t <= b[3]:
        return 1.0 - ramp(b[2])
    if t <= b[4]:
        return 0.0
    if t <= b[5]:
        return -ramp(b[4])
    if t <= b[6]:
        return -1.0
    return -1.0 + ramp(b[6])


@dataclass(frozen=True)
class SensitivityProfile:
    """g(t) bundled with its timing and epoch edges."""

    timing: SequenceTiming
    breakpoints: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", self.timing.breakpoints)

    def __call__(self, t: float) -> float:
        return gravity_sensitivity(self.timing, t)


def _segment_quad(timing: SequenceTiming, weight, window=None) -> float:
    """Integrate g(t)*weight(t) segment by segment (piecewise smooth)."""
    edges = list(timing.breakpoints)
    lo = edges[0] if window is None else max(window[0], edges[0])
    hi = edges[-1] if window is None else min(window[1], edges[-1])
    if hi <= lo:
        return 0.0
    cuts = sorted({lo, hi, *[e for e in edges if lo < e < hi]})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, err = quad(
            lambda t: gravity_sensitivity(timing, t) * weight(t),
            a,
            b,
            epsabs=QUAD_ABS_TOL,
            epsrel=1e-12,
            limit=200,
        )
        if not math.isfinite(val) or err > 1e-8:
            raise NumericalError(
                f"quadrature did not converge on [{a}, {b}] (err {err:.2e})"
            )
        total += val
    return total


def net_area(timing: SequenceTiming, window: tuple[float, float] | None = None) -> float:
    """Integral of g(t) in seconds, optionally over a window.

    The full sequence integrates to zero: the two lobes carry areas of
    exactly +(pulse + separation) and -(pulse + separation).
    """
    return _segment_quad(timing, lambda t: 1.0, window)


def scale_factor(timing: SequenceTiming, constants: PhysicalConstants) -> float:
    """Scale factor in s^2/m: k_eff times the time-weighted area of g(t).

    Returned as a positive magnitude; measured fringe fits carry the
    sign convention of the readout instead.
    """
    t0 = timing.start_s
    weighted = _segment_quad(timing, lambda t: t - t0)
    return constants.k_eff_per_m * abs(weighted)


def phase_signal(
    g_m_s2: float,
    alpha_rad_s2: float,
    scale_s2_per_m: float,
    constants: PhysicalConstants,
) -> float:
    """Interferometer phase for acceleration g under chirp rate alpha.

    phi = (g - alpha/k_eff) * S; the chirp term removes the phase that
    the frequency ramp writes onto the atoms.
    """
    return (g_m_s2 - alpha_rad_s2 / constants.k_eff_per_m) * scale_s2_per_m
