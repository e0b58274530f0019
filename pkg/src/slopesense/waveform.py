"""Continuous buffered bitcell voltage during a slope-sensing read.

A ramp current I(t) = slope * (t - t_start) is injected into the cell.
The bitcell voltage is I(t) * R, with the high-state resistance evaluated
self-consistently against the bias rolloff curve (fixed point on
V = I * R_H(V)).  A source-follower buffer level-shifts the bitcell node
and clamps it into [0, ceiling].

Switching is an instantaneous resistance step at t_sw: high-state cells
present R_H(V) for t < t_sw and R_L afterwards, which produces exactly
one negative step in an otherwise rising trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from slopesense.device import (
    DeviceSample,
    State,
    TmrRolloffCurve,
    resistance_at_bias,
    switching_time,
)
from slopesense.errors import ConfigError, NumericError

FIXED_POINT_TOL_V = 1e-4
FIXED_POINT_MAX_ITER = 20


@dataclass(frozen=True)
class RampConfig:
    slope_ua_ns: float       # ramp current slope, uA/ns (sweepable 5..14)
    f_clk_mhz: float         # system clock
    wl_cycles: int = 13      # word-line active duration in clock cycles
    t_start_ns: float = 0.0  # speedup-transistor delay before the ramp is linear

    def __post_init__(self):
        if self.slope_ua_ns <= 0:
            raise ConfigError("ramp slope must be positive")
        if self.f_clk_mhz <= 0:
            raise ConfigError("f_clk must be positive")
        if self.wl_cycles < 1:
            raise ConfigError("wl_cycles must be >= 1")
        if self.t_start_ns < 0:
            raise ConfigError("t_start must be >= 0")

    @property
    def t_clk_ns(self) -> float:
        return 1e3 / self.f_clk_mhz

    @property
    def t_sense_ns(self) -> float:
        return self.wl_cycles * self.t_clk_ns


@dataclass(frozen=True)
class BufferModel:
    """Source-follower buffer abstraction.

    The net level shift applied to the bitcell node is a single calibrated
    constant, level_shift = vdd_nominal - offset - swing_headroom, fixed at
    the nominal supply.  The output clamps into [0, ceiling] with ceiling
    = vdd - ceiling_margin tracking the actual supply.
    """

    vdd_v: float = 1.2
    offset_v: float = 0.33
    swing_headroom_v: float = 0.67
    ceiling_margin_v: float = 0.05
    vdd_nominal_v: float = 1.2

    def __post_init__(self):
        if self.vdd_v <= 0:
            raise ConfigError("vdd must be positive")
        if not (0 <= self.ceiling_margin_v < self.vdd_v):
            raise ConfigError("bad ceiling margin")
        if not (0.0 <= self.level_shift_v < self.ceiling_v):
            raise ConfigError(
                f"level shift {self.level_shift_v:.3f} V outside [0, ceiling)"
            )

    @property
    def level_shift_v(self) -> float:
        return self.vdd_nominal_v - self.offset_v - self.swing_headroom_v

    @property
    def ceiling_v(self) -> float:
        return self.vdd_v - self.ceiling_margin_v


def ramp_current(t_ns: float, cfg: RampConfig) -> float:
    """Injected ramp current (uA) at time t; zero before t_start."""
    if t_ns < 0:
        raise ConfigError("time must be >= 0")
    dt = t_ns - cfg.t_start_ns
    return cfg.slope_ua_ns * dt if dt > 0 else 0.0


def _solve_high_state_voltage(
    current_ua: float, sample: DeviceSample, curve: TmrRolloffCurve
) -> float:
    """Fixed point of V = I * R_H(V), <= 20 iterations, tol 0.1 mV."""
    v = current_ua * sample.r_high * 1e-6  # start from the zero-bias resistance
    for _ in range(FIXED_POINT_MAX_ITER):
        v_next = current_ua * resistance_at_bias(sample, State.HIGH, v, curve) * 1e-6
        if abs(v_next - v) <= FIXED_POINT_TOL_V:
            return v_next
        v = v_next
    raise NumericError(
        f"bitcell bias fixed point did not converge at I={current_ua:.3f} uA"
    )


def bitcell_voltage(
    t_ns: float,
    sample: DeviceSample,
    stored_bit: int,
    t_sw_ns: Optional[float],
    cfg: RampConfig,
    curve: TmrRolloffCurve,
) -> float:
    """Bitcell node voltage at time t for a cell storing `stored_bit`.

    A stored '1' presents the bias-degraded high resistance until t_sw and
    the low resistance afterwards; a stored '0' is always in the low state.
    """
    i = ramp_current(t_ns, cfg)
    high = stored_bit == 1 and (t_sw_ns is None or t_ns < t_sw_ns)
    if not high:
        return i * sample.r_low * 1e-6
    if i == 0.0:
        return 0.0
    return _solve_high_state_voltage(i, sample, curve)


def buffered_voltage(v_bit: float, buf: BufferModel) -> float:
    """Buffer output: clamp(v_bit + level_shift, 0, ceiling)."""
    if v_bit < 0:
        raise ConfigError("bitcell voltage must be >= 0")
    return max(0.0, min(v_bit + buf.level_shift_v, buf.ceiling_v))


@dataclass
class WaveformTrace:
    """Evaluator for the buffered bitcell voltage over one sense window."""

    sample: DeviceSample
    stored_bit: int
    cfg: RampConfig
    buf: BufferModel
    curve: TmrRolloffCurve
    t_sw_ns: Optional[float]         # raw switching time; may exceed the window
    switch_time_ns: Optional[float]  # t_sw when inside the window, else None
    clamp_onset_ns: Optional[float]  # first time the output hits the ceiling

    def v_bit(self, t_ns: float) -> float:
        return bitcell_voltage(
            t_ns, self.sample, self.stored_bit, self.t_sw_ns, self.cfg, self.curve
        )

    def v_bufo(self, t_ns: float) -> float:
        if not (0.0 <= t_ns <= self.cfg.t_sense_ns + 1e-9):
            raise ConfigError(f"t={t_ns} ns outside the sense window")
        return buffered_voltage(self.v_bit(t_ns), self.buf)

    def v_bufo_many(self, times_ns) -> np.ndarray:
        return np.array([self.v_bufo(float(t)) for t in np.atleast_1d(times_ns)])


def synthesize(
    sample: DeviceSample,
    stored_bit: int,
    cfg: RampConfig,
    buf: BufferModel,
    curve: TmrRolloffCurve,
    rng: Optional[np.random.Generator] = None,
    t_sw_ns: Optional[float] = None,
) -> WaveformTrace:
    """Build the waveform for one read.

    For a stored '1' the switching time is drawn from the device model
    unless supplied via `t_sw_ns`.  `switch_time_ns` on the returned trace
    is None when the switch falls outside the sense window.
    """
    if stored_bit not in (0, 1):
        raise ConfigError("stored_bit must be 0 or 1")
    t_sw = None
    if stored_bit == 1:
        if t_sw_ns is not None:
            t_sw = float(t_sw_ns)
        else:
            if sample.switching_sigma > 0 and rng is None:
                raise ConfigError("rng required when switching_sigma > 0")
            t_sw = switching_time(
                sample, cfg.slope_ua_ns, rng if rng is not None else np.random.default_rng(0)
            )
        t_sw += cfg.t_start_ns

    trace = WaveformTrace(
        sample=sample,
        stored_bit=stored_bit,
        cfg=cfg,
        buf=buf,
        curve=curve,
        t_sw_ns=t_sw,
        switch_time_ns=(t_sw if t_sw is not None and t_sw <= cfg.t_sense_ns else None),
        clamp_onset_ns=None,
    )
    trace.clamp_onset_ns = _clamp_onset(trace)
    return trace


def _clamp_onset(trace: WaveformTrace) -> Optional[float]:
    """First time the buffered output reaches the ceiling, if any.

    The low-state segments are linear in time, so their onset is solved
    directly; the self-consistent high-state segment is scanned on a fine
    grid (it is monotone in t).
    """
    cfg, buf = trace.cfg, trace.buf
    headroom = buf.ceiling_v - buf.level_shift_v
    t_sense = cfg.t_sense_ns

    def low_onset(from_t: float) -> Optional[float]:
        i_need = headroom / (trace.sample.r_low * 1e-6)
        t = cfg.t_start_ns + i_need / cfg.slope_ua_ns
        t = max(t, from_t)
        return t if t <= t_sense else None

    if trace.stored_bit == 0:
        return low_onset(0.0)

    t_sw = trace.t_sw_ns
    end_high = min(t_sw if t_sw is not None else t_sense, t_sense)
    if end_high > 0:
        n = max(2, int(end_high * 4))
        for t in np.linspace(0.0, end_high, n):
            if trace.v_bit(float(t)) >= headroom - 1e-12:
                return float(t)
    if t_sw is not None and t_sw < t_sense:
        return low_onset(t_sw)
    return None
