"""Slope-detection read decision.

Each sense circuit owns a sample-and-hold pair clocked at one quarter of
the system clock; the two held values are compared at every sense-enable
edge, and the paired NOR latches capture both comparison polarities, so
behaviorally the circuit compares every two consecutive samples of its
own sequence ("earlier minus later").  A '1' latches when the earlier
sample exceeds the later one by more than the comparator offset plus its
resolving overdrive.  All latched bits of a circuit are ORed; in double
sampling the two circuits (offset by one clock) are ORed as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from slopesense.device import DeviceSample, State, TmrRolloffCurve
from slopesense.errors import ConfigError
from slopesense.waveform import BufferModel, RampConfig, WaveformTrace, synthesize

_EPS = 1e-9


class Mode(Enum):
    SINGLE = "SINGLE"
    DOUBLE = "DOUBLE"


class FailureClass(Enum):
    NONE = "NONE"
    SM0_FAIL = "SM0_FAIL"  # stored '0' read as '1'
    SM1_FAIL = "SM1_FAIL"  # stored '1' read as '0'


@dataclass(frozen=True)
class ComparatorInstance:
    """One sense amplifier: a static input offset plus resolving overdrive.

    The offset is drawn once per circuit per read; an adverse (negative)
    draw larger in magnitude than the compared rise flips a '0' decision.
    """

    offset_v: float
    threshold_v: float = 0.0

    def latches_one(self, older_v: float, newer_v: float) -> bool:
        return (older_v - newer_v) - self.offset_v - self.threshold_v > 0.0


@dataclass(frozen=True)
class SenseParams:
    sa_offset_mu_v: float = 0.008
    sa_offset_sigma_v: float = 0.016
    sa_threshold_v: float = 0.016
    noise_sigma_v: float = 0.001

    def draw_comparator(self, rng: np.random.Generator) -> ComparatorInstance:
        off = self.sa_offset_mu_v
        if self.sa_offset_sigma_v > 0:
            off += self.sa_offset_sigma_v * rng.standard_normal()
        return ComparatorInstance(off, self.sa_threshold_v)


@dataclass(frozen=True)
class CircuitSchedule:
    """Event times (ns) for one sense circuit."""

    sample_times: Tuple[float, ...]   # interleaved phi / phi-delayed events
    se_times: Tuple[float, ...]       # sense-amplifier enable edges, one per pair
    le_times: Tuple[float, ...]       # latch enable edges, one per pair

    @property
    def n_pairs(self) -> int:
        return len(self.se_times)


@dataclass(frozen=True)
class SamplingSchedule:
    f_clk_mhz: float
    t_sense_ns: float
    divider: int
    phase_delay_ns: float
    second_pair_offset_ns: float
    mode: Mode
    circuits: Tuple[CircuitSchedule, ...]

    @property
    def period_ns(self) -> float:
        return self.divider * 1e3 / self.f_clk_mhz


def schedule(
    f_clk_mhz: float,
    wl_cycles: int,
    mode: Mode,
    divider: int = 4,
    phase_delay_clocks: float = 2.0,
    second_pair_offset_clocks: float = 1.0,
    start_clocks: float = 1.0,
) -> SamplingSchedule:
    """Derive sample/SE/LE event times from the clock.

    Each S/H pair samples once per `divider` clocks; phi-delayed trails phi
    by `phase_delay_clocks`.  A pair counts only when its latch enable
    still falls inside the sense window.  In DOUBLE mode the second
    circuit's events are shifted by `second_pair_offset_clocks`.
    """
    if f_clk_mhz <= 0:
        raise ConfigError("f_clk must be positive")
    if wl_cycles < divider:
        raise ConfigError(
            f"sense window of {wl_cycles} cycles too short for one "
            f"sample pair (divider {divider})"
        )
    t_clk = 1e3 / f_clk_mhz
    t_sense = wl_cycles * t_clk
    period = divider * t_clk
    phase_delay = phase_delay_clocks * t_clk
    if not (0 < phase_delay < period):
        raise ConfigError("phase delay must lie inside the sampling period")
    second_offset = second_pair_offset_clocks * t_clk

    def build(shift_ns: float) -> Optional[CircuitSchedule]:
        samples: List[float] = []
        se: List[float] = []
        le: List[float] = []
        k = 0
        while True:
            phi = start_clocks * t_clk + k * period + shift_ns
            phi_d = phi + phase_delay
            le_t = phi_d + t_clk
            if le_t > t_sense + _EPS:
                break
            samples.extend((phi, phi_d))
            se.append(phi_d + 0.5 * t_clk)
            le.append(le_t)
            k += 1
        if not samples:
            return None
        return CircuitSchedule(tuple(samples), tuple(se), tuple(le))

    first = build(0.0)
    if first is None:
        raise ConfigError("sense window too short for one full sample pair")
    circuits = [first]
    if mode is Mode.DOUBLE:
        second = build(second_offset)
        if second is not None:
            circuits.append(second)

    return SamplingSchedule(
        f_clk_mhz=f_clk_mhz,
        t_sense_ns=t_sense,
        divider=divider,
        phase_delay_ns=phase_delay,
        second_pair_offset_ns=second_offset,
        mode=mode,
        circuits=tuple(circuits),
    )


@dataclass
class CircuitOutcome:
    """Per-circuit record of one read (also the debug-JSON payload)."""

    sample_times: Tuple[float, ...]
    samples: Tuple[float, ...]        # held voltages including noise
    diffs: Tuple[float, ...]          # newer minus older, per compared edge
    latched: Tuple[bool, ...]
    offset_v: float
    bit: int


def compare_at_edges(
    trace: WaveformTrace,
    sched: SamplingSchedule,
    comparators: Sequence[ComparatorInstance],
    noise_sigma_v: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> List[CircuitOutcome]:
    """Sample the trace on each circuit's grid and run the latch decisions.

    Every sampled value is optionally perturbed by independent Gaussian
    noise (differential sampling noise); each circuit's comparator offset
    is fixed for the whole read.
    """
    if len(comparators) < len(sched.circuits):
        raise ConfigError("need one comparator per sense circuit")
    if noise_sigma_v > 0 and rng is None:
        raise ConfigError("rng required when noise_sigma_v > 0")

    outcomes: List[CircuitOutcome] = []
    for comp, circ in zip(comparators, sched.circuits):
        values = [trace.v_bufo(t) for t in circ.sample_times]
        if noise_sigma_v > 0:
            values = [v + noise_sigma_v * rng.standard_normal() for v in values]
        diffs = []
        latched = []
        for older, newer in zip(values, values[1:]):
            diffs.append(newer - older)
            latched.append(comp.latches_one(older, newer))
        outcomes.append(
            CircuitOutcome(
                sample_times=circ.sample_times,
                samples=tuple(values),
                diffs=tuple(diffs),
                latched=tuple(latched),
                offset_v=comp.offset_v,
                bit=int(any(latched)),
            )
        )
    return outcomes


@dataclass
class ReadResult:
    bit: int
    sm0_v: Optional[float]            # minimum positive compared difference
    sm1_v: float                      # most negative compared difference, else 0
    per_circuit: Tuple[CircuitOutcome, ...]
    failure_class: FailureClass
    post_state: State
    switch_time_ns: Optional[float]
    clamp_onset_ns: Optional[float]


def _margins(
    outcomes: Sequence[CircuitOutcome], t_sw_ns: Optional[float]
) -> Tuple[Optional[float], float]:
    sm0 = None
    sm1 = 0.0
    for oc in outcomes:
        for (t_new, d) in zip(oc.sample_times[1:], oc.diffs):
            if d < sm1:
                sm1 = d
            pre_switch = t_sw_ns is None or t_new <= t_sw_ns
            if d > 0 and pre_switch and (sm0 is None or d < sm0):
                sm0 = d
    return sm0, sm1


def slope_read(
    sample: DeviceSample,
    stored_bit: int,
    cfg: RampConfig,
    buf: BufferModel,
    sched: SamplingSchedule,
    curve: TmrRolloffCurve,
    sense: SenseParams,
    rng: np.random.Generator,
    t_sw_ns: Optional[float] = None,
) -> ReadResult:
    """One full slope-sensing read of one cell.

    Draw order per read is fixed (switching time, per-circuit offsets,
    per-sample noise) so results are reproducible for a given stream.
    """
    trace = synthesize(sample, stored_bit, cfg, buf, curve, rng=rng, t_sw_ns=t_sw_ns)
    comparators = [sense.draw_comparator(rng) for _ in sched.circuits]
    outcomes = compare_at_edges(trace, sched, comparators, sense.noise_sigma_v, rng)
    bit = int(any(oc.bit for oc in outcomes))
    sm0, sm1 = _margins(outcomes, trace.switch_time_ns)

    if stored_bit == 0 and bit == 1:
        failure = FailureClass.SM0_FAIL
    elif stored_bit == 1 and bit == 0:
        failure = FailureClass.SM1_FAIL
    else:
        failure = FailureClass.NONE

    switched = stored_bit == 1 and trace.switch_time_ns is not None
    post_state = State.LOW if (stored_bit == 0 or switched) else State.HIGH
    return ReadResult(
        bit=bit,
        sm0_v=sm0,
        sm1_v=sm1,
        per_circuit=tuple(outcomes),
        failure_class=failure,
        post_state=post_state,
        switch_time_ns=trace.switch_time_ns,
        clamp_onset_ns=trace.clamp_onset_ns,
    )


def oracle_bit(outcomes: Sequence[CircuitOutcome]) -> int:
    """Brute-force consecutive-difference oracle.

    Declares '1' iff the minimum over compared pairs of (newer - older)
    is negative; must agree with slope_read when offsets, overdrive and
    noise are all zero.
    """
    best = 0.0
    for oc in outcomes:
        if oc.diffs:
            best = min(best, min(oc.diffs))
    return int(best < 0.0)
