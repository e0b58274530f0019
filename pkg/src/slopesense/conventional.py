"""Conventional clamped voltage sensing against a shared reference column.

The NMOS clamp is an ideal source follower (bitline bias = v_clamp - v_tn)
and the load is a linear resistor whose sense node clips into
[v_floor, v_ceil]; raising the clamp voltage raises the leg currents,
walking the sense nodes down toward the floor, which is what trades
sense-0 margin against sense-1 margin across the sweep.

Every global column owns one reference resistor shared by its eight data
bitlines (two physical reference bitlines are averaged).  Reference and
data cells of a column may share a fraction of the common process shock
(`column_tracking_frac`), which models within-column tracking and is a
calibrated per-flavor constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from slopesense.device import DeviceSample, State, TmrRolloffCurve, resistance_at_bias
from slopesense.errors import ConfigError
from slopesense.sensing import ComparatorInstance, FailureClass, ReadResult
from slopesense.variation import DeviceSampler

DATA_BITLINES_PER_COLUMN = 8


@dataclass(frozen=True)
class ConvConfig:
    """Scalar (flavor-resolved) conventional-sensing configuration.

    The committed defaults are the LO-array calibration; the HI array uses
    a load sized to its doubled cell impedance (r_load 8800, v_floor 0.25),
    resolved by the experiments layer from the run configuration.
    """

    v_clamp_v: float = 0.80
    v_tn_v: float = 0.6           # clamp threshold: bitline bias = v_clamp - v_tn
    r_load_ohm: float = 4400.0
    v_floor_v: float = 0.86       # load compliance floor
    v_ceil_margin_v: float = 0.1  # v_ceil = vdd - margin
    vdd_v: float = 1.2
    ref_bias_v: float = 0.25      # bias at which the reference composition is fixed
    ref_bitlines: int = 2         # physical reference bitlines averaged per column
    column_tracking: Dict[str, float] = field(
        default_factory=lambda: {"LO": 0.9, "HI": 0.9}
    )

    def __post_init__(self):
        if self.v_clamp_v <= self.v_tn_v:
            raise ConfigError("v_clamp must exceed the clamp threshold v_tn")
        if not (0 < self.v_floor_v < self.v_ceil_v <= self.vdd_v):
            raise ConfigError("need 0 < v_floor < v_ceil <= vdd")
        if self.r_load_ohm <= 0:
            raise ConfigError("r_load must be positive")
        if self.ref_bitlines < 1:
            raise ConfigError("ref_bitlines must be >= 1")
        for k, v in self.column_tracking.items():
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"column_tracking[{k}] must be in [0, 1]")

    @property
    def v_ceil_v(self) -> float:
        return self.vdd_v - self.v_ceil_margin_v

    @property
    def v_mtj_v(self) -> float:
        return self.v_clamp_v - self.v_tn_v

    def tracking_for(self, flavor_name: str) -> float:
        return self.column_tracking.get(flavor_name, 0.0)


@dataclass(frozen=True)
class ReferenceColumn:
    """One global column's reference resistance (shared by 8 data bitlines)."""

    r_ref_ohm: float

    def __post_init__(self):
        if self.r_ref_ohm <= 0:
            raise ConfigError("reference resistance must be positive")


def leg_voltage(r_ohm: float, cfg: ConvConfig) -> float:
    """Sense-node voltage of one leg carrying I = (v_clamp - v_tn)/r."""
    if r_ohm <= 0:
        raise ConfigError("leg resistance must be positive")
    i = cfg.v_mtj_v / r_ohm
    node = cfg.vdd_v - cfg.r_load_ohm * i
    return max(cfg.v_floor_v, min(node, cfg.v_ceil_v))


def reference_nominal(
    sampler: DeviceSampler, cfg: ConvConfig, curve: TmrRolloffCurve
) -> float:
    """Arithmetic mean of the population's low and bias-degraded high anchors.

    The reference resistors are fabricated (and trimmed) to sit midway
    between the array's expected low and high resistances at the nominal
    read bias, so the anchors are the sampled population means rather than
    the raw zero-bias nominals.
    """
    bias_factor = (1.0 + sampler.tmr_target * (1.0 - curve.reduction(cfg.ref_bias_v)) / 100.0) / (
        1.0 + sampler.tmr_target / 100.0
    )
    load = sampler.loadings()
    if load is None:
        e_low, e_high = sampler.r_low0, sampler.r_high0
    else:
        e_low = load.median_low * math.exp((load.a_low ** 2 + load.b_low ** 2) / 2.0)
        e_high = load.median_high * math.exp((load.a_high ** 2 + load.b_high ** 2) / 2.0)
    return 0.5 * (e_low + e_high * bias_factor)


def sample_reference(
    sampler: DeviceSampler,
    cfg: ConvConfig,
    curve: TmrRolloffCurve,
    rng: np.random.Generator,
    u_col: float = 0.0,
) -> ReferenceColumn:
    """Draw one column's reference resistance.

    The reference carries the mid loadings of the two cell states; its
    column-local components average down by sqrt(ref_bitlines), while the
    column-shared fraction of the common shock is taken from `u_col`.
    """
    nominal = reference_nominal(sampler, cfg, curve)
    load = sampler.loadings()
    n = cfg.ref_bitlines
    phi = cfg.tracking_for(sampler.flavor.value)
    if load is None:
        if sampler.spec.mimic_poly and sampler.spec.poly_sigma_intra > 0:
            s = sampler.spec.poly_sigma_intra / math.sqrt(n)
            z = rng.standard_normal()
            return ReferenceColumn(nominal * math.exp(s * z - s * s / 2.0))
        rng.standard_normal()  # keep stream layout stable
        return ReferenceColumn(nominal)

    a, b = load.a_mid, load.b_mid
    var_shared = a * a * phi
    var_local = (a * a * (1.0 - phi) + b * b) / n
    z_loc = rng.standard_normal()
    ln_dev = (
        a * math.sqrt(phi) * u_col
        + math.sqrt(var_local) * z_loc
        - 0.5 * (var_shared + var_local)
    )
    return ReferenceColumn(nominal * math.exp(ln_dev))


def sense_margins(
    sample: DeviceSample,
    ref: ReferenceColumn,
    cfg: ConvConfig,
    curve: TmrRolloffCurve,
) -> tuple[float, float]:
    """(sm0, sm1): headroom of the reference node against each stored state.

    The node voltage falls with leg current, so a low-resistance data cell
    sits below the reference node (sm0 = V_ref - V_low) and a high one
    above it (sm1 = V_high - V_ref).
    """
    v_bias = cfg.v_mtj_v
    v_low = leg_voltage(resistance_at_bias(sample, State.LOW, v_bias, curve), cfg)
    v_high = leg_voltage(resistance_at_bias(sample, State.HIGH, v_bias, curve), cfg)
    v_ref = leg_voltage(ref.r_ref_ohm, cfg)
    return v_ref - v_low, v_high - v_ref


def conventional_read(
    sample: DeviceSample,
    stored_bit: int,
    ref: ReferenceColumn,
    comparator: ComparatorInstance,
    cfg: ConvConfig,
    curve: TmrRolloffCurve,
) -> ReadResult:
    """Non-destructive compare of the data leg against the reference leg."""
    if stored_bit not in (0, 1):
        raise ConfigError("stored_bit must be 0 or 1")
    state = State.HIGH if stored_bit == 1 else State.LOW
    r_data = resistance_at_bias(sample, state, cfg.v_mtj_v, curve)
    v_data = leg_voltage(r_data, cfg)
    v_ref = leg_voltage(ref.r_ref_ohm, cfg)
    bit = int(v_data - v_ref + comparator.offset_v > 0.0)

    if stored_bit == 0 and bit == 1:
        failure = FailureClass.SM0_FAIL
    elif stored_bit == 1 and bit == 0:
        failure = FailureClass.SM1_FAIL
    else:
        failure = FailureClass.NONE

    sm0, sm1 = sense_margins(sample, ref, cfg, curve)
    return ReadResult(
        bit=bit,
        sm0_v=sm0,
        sm1_v=sm1,
        per_circuit=(),
        failure_class=failure,
        post_state=state,
        switch_time_ns=None,
        clamp_onset_ns=None,
    )
