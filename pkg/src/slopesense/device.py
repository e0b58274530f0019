"""Bias-dependent behavioral model of a single MTJ-like bitcell.

The cell has two zero-bias resistance states R_L ('0') and R_H ('1').
TMR = 100*(R_H - R_L)/R_L shrinks with the voltage applied across the
junction; the reduction is described by a piecewise-linear rolloff curve.
Only the high state degrades with bias -- the low state is modeled as
bias-independent.

High-to-low switching under a ramp current follows a critical-current
model: the cell switches when the ramp reaches a per-device stochastic
current threshold, so the switching time scales inversely with the ramp
slope.  Thermal fluctuation and process variation are folded into a
single Gaussian sigma, truncated at +/-6 sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from slopesense.errors import ConfigError

# Reference ramp slope (uA/ns) at which switching-time statistics are quoted.
REF_RAMP_SLOPE_UA_NS = 6.0

# Gaussian truncation for switching-time draws, in sigmas.
SWITCHING_TRUNCATION_SIGMA = 6.0


class State(Enum):
    LOW = 0
    HIGH = 1


class Flavor(Enum):
    """Array resistance flavor: LO = 2.5K-5K cells, HI = 5K-10K cells."""

    LO = "LO"
    HI = "HI"


@dataclass(frozen=True)
class MtjNominal:
    """Nominal (typical-corner) cell parameters for one flavor."""

    r_low0: float          # ohm, zero-bias low-state resistance
    r_high0: float         # ohm, zero-bias high-state resistance
    tox_mean: float        # nm
    tox_sigma_frac: float  # fraction of tox_mean
    area_mean: float       # nm^2
    area_sigma_frac: float # fraction of area_mean
    flavor: Flavor

    def __post_init__(self):
        if not (self.r_high0 > self.r_low0 > 0):
            raise ConfigError(
                f"need r_high0 > r_low0 > 0, got {self.r_high0}/{self.r_low0}"
            )
        for name in ("tox_sigma_frac", "area_sigma_frac"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ConfigError(f"{name} must be in [0, 1), got {v}")


class TmrRolloffCurve:
    """Piecewise-linear TMR reduction vs applied voltage.

    Points are (bias_voltage_V, reduction_fraction); the first point must
    be (0, 0), reductions must be non-decreasing and < 1.  Beyond the last
    point the reduction is held constant.
    """

    def __init__(self, points: Sequence[Tuple[float, float]]):
        pts = [(float(v), float(r)) for v, r in points]
        if not pts:
            raise ConfigError("rolloff curve needs at least one point")
        if pts[0] != (0.0, 0.0):
            raise ConfigError("rolloff curve must start at (0 V, 0 reduction)")
        for (v0, r0), (v1, r1) in zip(pts, pts[1:]):
            if v1 <= v0:
                raise ConfigError("rolloff voltages must be strictly increasing")
            if r1 < r0:
                raise ConfigError("rolloff reductions must be non-decreasing")
        if any(r >= 1.0 for _, r in pts):
            raise ConfigError("rolloff reductions must be < 1")
        self.points = tuple(pts)
        self._v = np.array([p[0] for p in pts])
        self._r = np.array([p[1] for p in pts])

    def reduction(self, v: float) -> float:
        """Fractional TMR reduction at bias v (constant beyond last point)."""
        if v < 0:
            raise ConfigError(f"bias voltage must be >= 0, got {v}")
        return float(np.interp(v, self._v, self._r))

    @classmethod
    def flat(cls) -> "TmrRolloffCurve":
        """No bias dependence (poly-resistor mimic cells)."""
        return cls([(0.0, 0.0)])


# Rolloff anchors for a real junction: 15% reduction at 0.25 V and 51% at
# 0.6 V, linearly interpolated.
DEFAULT_ROLLOFF_POINTS = ((0.0, 0.0), (0.25, 0.15), (0.60, 0.51))


def default_rolloff() -> TmrRolloffCurve:
    return TmrRolloffCurve(DEFAULT_ROLLOFF_POINTS)


@dataclass(frozen=True)
class DeviceSample:
    """One sampled bitcell."""

    r_low: float           # ohm, zero-bias
    r_high: float          # ohm, zero-bias
    tmr0: float            # percent, zero-bias; == tmr_of(r_low, r_high)
    t_sw_ref: float        # ns, switching time at the reference ramp slope
    switching_sigma: float # ns, per-read switching-time sigma at ref slope

    def __post_init__(self):
        if not (self.r_high > self.r_low > 0):
            raise ConfigError("need r_high > r_low > 0")
        if self.t_sw_ref <= 0:
            raise ConfigError("t_sw_ref must be positive")
        if self.switching_sigma < 0:
            raise ConfigError("switching_sigma must be >= 0")
        expect = tmr_of(self.r_low, self.r_high)
        if abs(self.tmr0 - expect) > 1e-9 * max(1.0, abs(expect)):
            raise ConfigError(
                f"tmr0={self.tmr0} inconsistent with resistances (expect {expect})"
            )

    @classmethod
    def from_resistances(cls, r_low, r_high, t_sw_ref, switching_sigma=0.0):
        return cls(r_low, r_high, tmr_of(r_low, r_high), t_sw_ref, switching_sigma)


def tmr_of(r_low: float, r_high: float) -> float:
    """Zero-bias TMR in percent: 100*(r_high - r_low)/r_low."""
    if r_low <= 0:
        raise ConfigError(f"r_low must be positive, got {r_low}")
    return 100.0 * (r_high - r_low) / r_low


def tmr_at_voltage(tmr0: float, v: float, curve: TmrRolloffCurve) -> float:
    """Effective TMR (percent) at bias v: tmr0 * (1 - reduction(v))."""
    if v < 0:
        raise ConfigError(f"bias voltage must be >= 0, got {v}")
    return tmr0 * (1.0 - curve.reduction(v))


def resistance_at_bias(
    sample: DeviceSample, state: State, v: float, curve: TmrRolloffCurve
) -> float:
    """Cell resistance at bias v.

    The low state is bias-independent; the high state degrades with bias
    through the TMR rolloff: r_low * (1 + tmr(v)/100).
    """
    if state is State.LOW:
        if v < 0:
            raise ConfigError(f"bias voltage must be >= 0, got {v}")
        return sample.r_low
    return sample.r_low * (1.0 + tmr_at_voltage(sample.tmr0, v, curve) / 100.0)


def switching_time(
    sample: DeviceSample, ramp_slope: float, rng: np.random.Generator
) -> float:
    """Draw a high-to-low switching time (ns) under a ramp of `ramp_slope` uA/ns.

    Critical-current model: the mean time scales as (ref_slope/slope) and
    the Gaussian spread as sqrt(ref_slope/slope), truncated at +/-6 sigma
    (and at zero, which for sane parameters never binds).
    """
    if ramp_slope <= 0:
        raise ConfigError(f"ramp slope must be positive, got {ramp_slope}")
    scale = REF_RAMP_SLOPE_UA_NS / ramp_slope
    mean = scale * sample.t_sw_ref
    sigma = sample.switching_sigma * math.sqrt(scale)
    if sigma == 0.0:
        return mean
    while True:
        z = rng.standard_normal()
        if abs(z) > SWITCHING_TRUNCATION_SIGMA:
            continue
        t = mean + sigma * z
        if t > 0:
            return t
