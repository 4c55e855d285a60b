"""Elementary pulse mathematics.

Smooth-envelope Raman pulses: the Blackman window, its accumulated
rotation area, the single-pulse sensitivity ramp built from it, and a
two-level ODE model for the transfer efficiency of a physical pi pulse
under detuning.

Two distinct areas live on a pulse and must not be conflated:

* ``area_rad`` is the physical rotation the pulse implements (pi for the
  Raman mirror pulses).
* ``sensitivity_area_rad`` is the area used inside the sensitivity ramp;
  it is pi/2 so the ramp ends exactly at 1 and the piecewise gravimeter
  sensitivity function stays continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, DomainError, NumericalError

# Blackman window coefficients; a0 - a1 + a2 = 0 gives exact endpoint zeros
# and a0 + a1 + a2 = 1 gives a peak of exactly 1 at the pulse center.
_A0, _A1, _A2 = 0.42, 0.5, 0.08

BLACKMAN_MEAN = _A0  # mean of the window over one pulse; integral is 0.42*tau


def _window(x):
    # half-angle form, valid because _A0 - _A1 + _A2 == 0 for these
    # coefficients; makes the endpoint zeros exact in floating point
    c = np.cos(np.pi * x)
    s = np.sin(np.pi * x)
    return s * s * (2.0 * _A1 - 8.0 * _A2 * c * c)


def _window_integral(x):
    # antiderivative of _window with F(0) = 0
    return (
        _A0 * x
        - _A1 * np.sin(2 * np.pi * x) / (2 * np.pi)
        + _A2 * np.sin(4 * np.pi * x) / (4 * np.pi)
    )


@dataclass(frozen=True)
class PulseShape:
    """One Raman pulse: envelope kind, duration and the two areas."""

    kind: str = "blackman"  # "blackman" or "square"
    duration_s: float = 60e-6
    area_rad: float = math.pi
    sensitivity_area_rad: float = math.pi / 2

    def __post_init__(self):
        if self.kind not in ("blackman", "square"):
            raise ConfigError(f"unknown pulse kind {self.kind!r}")
        if self.duration_s <= 0:
            raise ConfigError("pulse duration must be > 0")
        if self.area_rad <= 0 or self.sensitivity_area_rad <= 0:
            raise ConfigError("pulse areas must be > 0")

    @property
    def peak_rabi_rad_s(self) -> float:
        """Peak Rabi rate that realizes area_rad over the envelope."""
        if self.kind == "square":
            return self.area_rad / self.duration_s
        return self.area_rad / (BLACKMAN_MEAN * self.duration_s)


@dataclass(frozen=True)
class TwoLevelState:
    """State vector of the driven two-level system."""

    amplitude_ground: complex
    amplitude_excited: complex

    @property
    def norm(self) -> float:
        return abs(self.amplitude_ground) ** 2 + abs(self.amplitude_excited) ** 2


def envelope(shape: PulseShape, t: float) -> float:
    """Normalized drive envelope at time t into the pulse, in [0, 1]."""
    if t < 0 or t > shape.duration_s:
        raise DomainError(
            f"t = {t} outside pulse support [0, {shape.duration_s}]"
        )
    if shape.kind == "square":
        return 1.0
    if t == 0.0 or t == shape.duration_s:
        return 0.0  # sin(pi*1.0) is ~1e-16, not 0; the zeros are exact by definition
    return float(_window(t / shape.duration_s))


def accumulated_area(shape: PulseShape, t: float) -> float:
    """Rotation area accumulated by time t, normalized to reach
    sensitivity_area_rad exactly at the end of the pulse."""
    if t < 0 or t > shape.duration_s:
        raise DomainError(
            f"t = {t} outside pulse support [0, {shape.duration_s}]"
        )
    x = t / shape.duration_s
    if shape.kind == "square":
        frac = x
    else:
        frac = _window_integral(x) / BLACKMAN_MEAN
    return shape.sensitivity_area_rad * float(frac)


def pulse_sensitivity(shape: PulseShape, t: float) -> float:
    """Single-pulse sensitivity ramp sin(accumulated area).

    Runs 0 -> 1 over the pulse when sensitivity_area_rad = pi/2; larger
    sensitivity areas would overshoot and break the piecewise continuity
    of the gravimeter sensitivity function, so they are rejected.
    """
    if shape.sensitivity_area_rad > math.pi / 2 + 1e-12:
        raise ConfigError(
            "sensitivity_area_rad must be <= pi/2 for a monotone 0 -> 1 ramp"
        )
    return math.sin(accumulated_area(shape, t))


def _drive_terms(shape: PulseShape, detuning_rad_s: float, detuning_model: str):
    if detuning_model not in ("envelope", "constant"):
        raise ConfigError(f"unknown detuning model {detuning_model!r}")
    om0 = shape.peak_rabi_rad_s
    tau = shape.duration_s

    if shape.kind == "square":
        # constant drive; both detuning models coincide
        def terms(t):
            return om0, detuning_rad_s

        return terms

    def terms(t):
        w = float(_window(t / tau))
        if detuning_model == "envelope":
            # light-shift detuning scales with intensity, i.e. with the
            # same envelope as the Rabi rate
            return om0 * w, detuning_rad_s * w
        return om0 * w, detuning_rad_s

    return terms


def evolve_two_level(
    shape: PulseShape,
    detuning_rad_s: float,
    detuning_model: str = "envelope",
    rtol: float = 1e-9,
) -> TwoLevelState:
    """Integrate the driven two-level Schrodinger equation over one pulse.

    Rotating-frame Hamiltonian (hbar = 1):
        H(t) = [[-delta(t)/2, Omega(t)/2], [Omega(t)/2, +delta(t)/2]]
    starting from the ground state.
    """
    terms = _drive_terms(shape, detuning_rad_s, detuning_model)

    def rhs(t, y):
        om, de = terms(t)
        cg = y[0] + 1j * y[1]
        ce = y[2] + 1j * y[3]
        dcg = -1j * (-0.5 * de * cg + 0.5 * om * ce)
        dce = -1j * (0.5 * om * cg + 0.5 * de * ce)
        return [dcg.real, dcg.imag, dce.real, dce.imag]

    sol = solve_ivp(
        rhs,
        (0.0, shape.duration_s),
        [1.0, 0.0, 0.0, 0.0],
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-3,
    )
    if not sol.success:
        raise NumericalError(f"two-level integration failed: {sol.message}")

    norms = sol.y[0] ** 2 + sol.y[1] ** 2 + sol.y[2] ** 2 + sol.y[3] ** 2
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > 1e-9:
        raise NumericalError(
            f"norm drift {drift:.2e} exceeds 1e-9; tighten rtol"
        )

    yf = sol.y[:, -1]
    return TwoLevelState(yf[0] + 1j * yf[1], yf[2] + 1j * yf[3])


def transfer_probability(
    shape: PulseShape,
    detuning_rad_s: float,
    detuning_model: str = "envelope",
    rtol: float = 1e-9,
) -> float:
    """Excited-state population after one physical pulse at fixed detuning.

    The default "envelope" model lets the detuning follow the pulse
    envelope (a light shift is proportional to intensity); "constant"
    holds it fixed across the pulse.
    """
    state = evolve_two_level(shape, detuning_rad_s, detuning_model, rtol)
    p = abs(state.amplitude_excited) ** 2
    return min(max(p, 0.0), 1.0)


def averaged_transfer(
    shape: PulseShape,
    detuning_mean_rad_s: float,
    detuning_sigma_rad_s: float,
    detuning_model: str = "envelope",
    nodes: int = 31,
    rtol: float = 1e-9,
) -> tuple[float, float]:
    """Mean and std of the transfer probability over a Gaussian detuning.

    Deterministic Gauss-Hermite quadrature; nodes >= 15 keeps the
    smooth integrand converged well below the quoted precision.
    """
    if detuning_sigma_rad_s < 0:
        raise DomainError("detuning sigma must be >= 0")
    if detuning_sigma_rad_s == 0:
        return transfer_probability(shape, detuning_mean_rad_s, detuning_model, rtol), 0.0
    if nodes < 15:
        raise ConfigError("need at least 15 quadrature nodes")

    x, w = np.polynomial.hermite.hermgauss(nodes)
    w = w / math.sqrt(math.pi)
    deltas = detuning_mean_rad_s + math.sqrt(2.0) * detuning_sigma_rad_s * x
    probs = np.array(
        [transfer_probability(shape, float(d), detuning_model, rtol) for d in deltas]
    )
    mean = float(np.sum(w * probs))
    second = float(np.sum(w * probs * probs))
    var = max(second - mean * mean, 0.0)
    return mean, math.sqrt(var)
