"""TDDB E-model lifetime and endurance math, plus write-back pulse margins.

The oxide breakdown rate follows p(V) = A * exp(V/B).  Under constant
voltage the half-life is ln(2)/p.  Under a repeated linear voltage ramp
the per-cycle cumulative hazard has the closed form
H(t) = (B/(dV/dt)) * (p(t) - A), and the half-life follows from the
cycle count at which the accumulated hazard reaches ln(2), assuming
back-to-back cycles (worst case).

Write-back: after a destructive slope-sensing read, only cells read as
'1' are restored; the write pulse is sized at mu + k*sigma of the write
latency distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from slopesense.errors import ConfigError


@dataclass(frozen=True)
class EModelParams:
    a_per_s: float = 9.43e-21  # breakdown-rate prefactor, 1/s
    b_volts: float = 0.019     # field-acceleration constant, V

    def __post_init__(self):
        if self.a_per_s <= 0 or self.b_volts <= 0:
            raise ConfigError("E-model constants must be positive")


class StressKind(Enum):
    CONST_V = "CONST_V"
    RAMP = "RAMP"


@dataclass(frozen=True)
class StressProfile:
    kind: StressKind
    v_volts: float = 0.0        # CONST_V level
    dv_dt_v_per_s: float = 0.0  # RAMP slope
    period_s: float = 0.0       # RAMP duration per read
    read_time_s: float = 0.0    # per-read duration for endurance math

    def __post_init__(self):
        if self.kind is StressKind.CONST_V and self.v_volts < 0:
            raise ConfigError("stress voltage must be >= 0")
        if self.kind is StressKind.RAMP and (
            self.dv_dt_v_per_s <= 0 or self.period_s <= 0
        ):
            raise ConfigError("ramp stress needs positive dv/dt and period")


@dataclass(frozen=True)
class WriteModel:
    latency_mu_ns: float = 4.7
    latency_sigma_ns: float = (10.0 - 4.7) / 6.0
    margin_k: float = 6.0
    write_current_ua: float = 100.0

    def __post_init__(self):
        if self.latency_mu_ns <= 0 or self.latency_sigma_ns < 0:
            raise ConfigError("bad write latency parameters")


def breakdown_probability(p: EModelParams, v: float) -> float:
    """Instantaneous breakdown rate A*exp(V/B), 1/s."""
    if v < 0:
        raise ConfigError("stress voltage must be >= 0")
    return p.a_per_s * math.exp(v / p.b_volts)


def half_life_const(p: EModelParams, v: float) -> float:
    """Mean lifetime ln(2)/p under a constant stress voltage, seconds."""
    return math.log(2.0) / breakdown_probability(p, v)


def ramp_hazard(p: EModelParams, dv_dt: float, t: float) -> float:
    """Cumulative hazard of one linear ramp 0..t: integral of A*exp(v(t')/B).

    Closed form (B/dv_dt) * (p(t) - A) with p(t) = A*exp(dv_dt*t/B).
    """
    if dv_dt <= 0:
        raise ConfigError("dv/dt must be positive")
    if t < 0:
        raise ConfigError("time must be >= 0")
    return (p.b_volts / dv_dt) * (breakdown_probability(p, dv_dt * t) - p.a_per_s)


def ramp_failure_fraction(p: EModelParams, dv_dt: float, t: float) -> float:
    """Intrinsic failure fraction F(t) = 1 - exp(-H(t)) under a linear ramp."""
    return -math.expm1(-ramp_hazard(p, dv_dt, t))


def lifetime_ramp(
    p: EModelParams,
    dv_dt: float,
    ramp_duration_s: float,
    period_s: Optional[float] = None,
) -> float:
    """Half-life under repeated ramp stress cycles, seconds.

    Cycles repeat every `period_s` (defaults to back-to-back ramps); the
    half-life is the time at which the accumulated per-cycle hazard
    reaches ln(2).
    """
    if ramp_duration_s <= 0:
        raise ConfigError("ramp duration must be positive")
    period = ramp_duration_s if period_s is None else period_s
    if period < ramp_duration_s:
        raise ConfigError("cycle period cannot be shorter than the ramp")
    h = ramp_hazard(p, dv_dt, ramp_duration_s)
    if h <= 0:
        raise ConfigError("hazard must be positive")
    return math.log(2.0) * period / h


def reads_per_second(read_time_s: float) -> float:
    """Read operations per second, floored then rounded to 2 significant figures.

    Matches the sustained-rate arithmetic behind the published endurance
    numbers (e.g. 26 ns -> 3.8e7, 12 ns -> 8.3e7).
    """
    if read_time_s <= 0:
        raise ConfigError("read time must be positive")
    raw = math.floor(1.0 / read_time_s)
    if raw <= 0:
        return float(raw)
    exp = math.floor(math.log10(raw))
    scale = 10.0 ** (exp - 1)
    return round(raw / scale) * scale


def endurance(lifetime_s: float, read_time_s: float) -> float:
    """Read operations before expected breakdown: reads/s times lifetime."""
    if lifetime_s <= 0:
        raise ConfigError("lifetime must be positive")
    return reads_per_second(read_time_s) * lifetime_s


def write_pulse(model: WriteModel) -> float:
    """Write-back pulse duration mu + k*sigma, ns."""
    return model.latency_mu_ns + model.margin_k * model.latency_sigma_ns


def write_latency_sample(model: WriteModel, rng: np.random.Generator) -> float:
    """One write latency draw, Gaussian truncated at zero, ns."""
    if model.latency_sigma_ns == 0.0:
        return model.latency_mu_ns
    while True:
        t = model.latency_mu_ns + model.latency_sigma_ns * rng.standard_normal()
        if t > 0:
            return t
