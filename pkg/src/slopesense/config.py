"""Run configuration: schema, committed calibrated defaults, validation.

The defaults committed here are the calibration of record: every value
was fixed by the calibration procedure (window placement for the slope
scheme, load/floor/grid placement for the conventional scheme) and the
acceptance suite runs against them.  Config files are JSON; unknown keys
are rejected and all knobs are range-checked at parse time.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from slopesense.device import Flavor, MtjNominal, TmrRolloffCurve
from slopesense.errors import ConfigError
from slopesense.reliability import EModelParams, WriteModel
from slopesense.sensing import Mode, SenseParams
from slopesense.variation import FlavorVariation, VariationSpec
from slopesense.waveform import BufferModel, RampConfig

RAMP_SLOPE_RANGE = (5.0, 14.0)     # uA/ns, documented sweep range
F_CLK_RANGE = (100.0, 600.0)       # MHz; extends past the chip's 500 MHz to
                                   # exercise the over-frequency failure mode
T_SW_CYCLES_RANGE = (8, 12)
VDD_RANGE = (0.9, 1.2)
TMR_RANGE_SLOPE = (80.0, 120.0)    # TMR trim range, slope sensing
TMR_RANGE_CONV = (60.0, 120.0)     # TMR trim range, conventional sensing


@dataclass(frozen=True)
class FlavorConfig:
    r_low0_ohm: float
    r_high0_ohm: float
    tox_mean_nm: float
    tox_sigma_frac: float
    area_mean_nm2: float
    area_sigma_frac: float
    t_sw_mu_ns: float
    t_sw_sigma_ns: float
    tmr_mean_pct: float
    tmr_sigma_pp: float


@dataclass(frozen=True)
class DeviceConfig:
    rolloff_points: Tuple[Tuple[float, float], ...] = ((0.0, 0.0), (0.25, 0.15), (0.6, 0.51))
    waveform_rolloff: str = "flat"  # "flat" (poly-mimic array) or "device"
    conv_rolloff: str = "flat"
    flavors: Dict[str, FlavorConfig] = field(default_factory=lambda: {
        "LO": FlavorConfig(2500.0, 5000.0, 1.2, 0.025, 4700.0, 0.15,
                           20.3, 0.75, 120.0, 10.0),
        "HI": FlavorConfig(5000.0, 10000.0, 1.2, 0.025, 2820.0, 0.15,
                           12.2, 0.45, 128.0, 8.0),
    })

    def curve(self) -> TmrRolloffCurve:
        return TmrRolloffCurve(self.rolloff_points)

    def path_curve(self, which: str) -> TmrRolloffCurve:
        mode = self.waveform_rolloff if which == "waveform" else self.conv_rolloff
        if mode == "flat":
            return TmrRolloffCurve.flat()
        if mode == "device":
            return self.curve()
        raise ConfigError(f"rolloff mode must be 'flat' or 'device', got {mode!r}")


@dataclass(frozen=True)
class VariationConfig:
    sigma_low_frac: float = 0.13
    sigma_high_frac: float = 0.11
    tox_k: float = 4.0
    poly_sigma_intra: float = 0.08
    poly_corner_span: float = 0.15
    mimic_poly: bool = False
    t_sw_read_sigma_ns: float = 0.0
    sa_offset_mu_v: float = 0.008
    sa_offset_sigma_v: float = 0.016


@dataclass(frozen=True)
class RampSection:
    slope_ua_ns: float = 6.0
    f_clk_mhz: float = 450.0
    wl_cycles: int = 13
    t_start_ns: float = 0.0
    vdd_delay_ns_per_v: float = 12.0  # extra ramp start delay per volt below nominal


@dataclass(frozen=True)
class BufferSection:
    vdd_v: float = 1.2
    offset_v: float = 0.33
    swing_headroom_v: float = 0.67
    ceiling_margin_v: float = 0.05


@dataclass(frozen=True)
class ScheduleSection:
    divider: int = 4
    phase_delay_clocks: float = 2.0
    second_pair_offset_clocks: float = 1.0
    start_clocks: float = 1.0
    mode: str = "DOUBLE"
    sa_threshold_v: float = 0.016
    noise_sigma_v: float = 0.001


@dataclass(frozen=True)
class ConvFlavorSection:
    r_load_ohm: float
    v_floor_v: float
    v_clamp_v: float
    sweep: Tuple[float, ...]


@dataclass(frozen=True)
class ConvSection:
    v_tn_v: float = 0.6
    v_ceil_margin_v: float = 0.1
    ref_bias_v: float = 0.25
    ref_bitlines: int = 2
    column_tracking: Dict[str, float] = field(
        default_factory=lambda: {"LO": 0.9, "HI": 0.9})
    per_flavor: Dict[str, ConvFlavorSection] = field(default_factory=lambda: {
        "LO": ConvFlavorSection(4400.0, 0.86, 0.80, (0.72, 0.76, 0.80, 0.82)),
        "HI": ConvFlavorSection(8800.0, 0.25, 0.90, (0.70, 0.80, 0.90, 1.00, 1.10)),
    })


@dataclass(frozen=True)
class ArraySection:
    n_bits: int = 98304
    flavor: str = "BOTH"      # LO, HI, or BOTH (even split)
    pattern: str = "CHECKER"  # ALL0, ALL1, CHECKER, RANDOM
    tmr_pct: float = 100.0


@dataclass(frozen=True)
class SweepSection:
    knob: str = "F_CLK"       # V_CLAMP, TMR, F_CLK, RAMP_SLOPE, T_SW_CYCLES, VDD
    values: Tuple[float, ...] = (100.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0, 550.0)


@dataclass(frozen=True)
class ShmooSection:
    vdd_values: Tuple[float, ...] = (0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2)
    f_values: Tuple[float, ...] = (100.0, 150.0, 200.0, 250.0, 300.0, 350.0,
                                   400.0, 450.0, 500.0)
    n_chips: int = 10
    n_bits: int = 1024
    pass_tolerance: int = 0   # max failures for a chip to pass a cell


@dataclass(frozen=True)
class ChipsSection:
    vdd_values: Tuple[float, ...] = (0.9, 0.95, 1.0, 1.1, 1.2)
    f_min_mhz: float = 100.0
    f_max_mhz: float = 600.0
    f_step_mhz: float = 25.0
    n_chips: int = 10
    n_bits: int = 1024


@dataclass(frozen=True)
class WriteSection:
    latency_mu_ns: float = 4.7
    latency_sigma_ns: float = (10.0 - 4.7) / 6.0
    margin_k: float = 6.0
    write_current_ua: float = 100.0


@dataclass(frozen=True)
class ReliabilitySection:
    a_per_s: float = 9.43e-21
    b_volts: float = 0.019
    stress_v_const: Dict[str, float] = field(
        default_factory=lambda: {"LO": 0.2, "HI": 0.24})
    ramp_dv_v: float = 0.6
    ramp_dt_ns: float = 20.0
    read_time_slope_ns: float = 26.0
    read_time_conv_ns: float = 12.0
    write: WriteSection = field(default_factory=WriteSection)


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 2024
    workers: int = 1
    output_dir: str = "out"
    device: DeviceConfig = field(default_factory=DeviceConfig)
    variation: VariationConfig = field(default_factory=VariationConfig)
    ramp: RampSection = field(default_factory=RampSection)
    buffer: BufferSection = field(default_factory=BufferSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    conv: ConvSection = field(default_factory=ConvSection)
    array: ArraySection = field(default_factory=ArraySection)
    sweep: SweepSection = field(default_factory=SweepSection)
    shmoo: ShmooSection = field(default_factory=ShmooSection)
    chips: ChipsSection = field(default_factory=ChipsSection)
    reliability: ReliabilitySection = field(default_factory=ReliabilitySection)

    # ------------------------------------------------------------------
    # Derived model objects
    # ------------------------------------------------------------------

    def variation_spec(self) -> VariationSpec:
        flavors = {}
        for name, fc in self.device.flavors.items():
            flavor = Flavor(name)
            flavors[flavor] = FlavorVariation(
                nominal=MtjNominal(
                    fc.r_low0_ohm, fc.r_high0_ohm, fc.tox_mean_nm,
                    fc.tox_sigma_frac, fc.area_mean_nm2, fc.area_sigma_frac,
                    flavor,
                ),
                sigma_low_frac=self.variation.sigma_low_frac,
                sigma_high_frac=self.variation.sigma_high_frac,
                tmr_mean_pct=fc.tmr_mean_pct,
                tmr_sigma_pp=fc.tmr_sigma_pp,
                t_sw_mu_ns=fc.t_sw_mu_ns,
                t_sw_sigma_ns=fc.t_sw_sigma_ns,
            )
        return VariationSpec(
            flavors=flavors,
            tox_k=self.variation.tox_k,
            poly_sigma_intra=self.variation.poly_sigma_intra,
            poly_corner_span=self.variation.poly_corner_span,
            sa_offset_mu_v=self.variation.sa_offset_mu_v,
            sa_offset_sigma_v=self.variation.sa_offset_sigma_v,
            mimic_poly=self.variation.mimic_poly,
            t_sw_read_sigma_ns=self.variation.t_sw_read_sigma_ns,
        )

    def ramp_config(self, f_clk_mhz=None, slope_ua_ns=None, vdd_v=None) -> RampConfig:
        f = self.ramp.f_clk_mhz if f_clk_mhz is None else f_clk_mhz
        s = self.ramp.slope_ua_ns if slope_ua_ns is None else slope_ua_ns
        t_start = self.ramp.t_start_ns
        if vdd_v is not None:
            # Slower supply -> longer speedup-transistor charge time.
            t_start += max(0.0, self.ramp.vdd_delay_ns_per_v * (self.buffer.vdd_v - vdd_v))
        return RampConfig(slope_ua_ns=s, f_clk_mhz=f,
                          wl_cycles=self.ramp.wl_cycles, t_start_ns=t_start)

    def buffer_model(self, vdd_v=None) -> BufferModel:
        return BufferModel(
            vdd_v=self.buffer.vdd_v if vdd_v is None else vdd_v,
            offset_v=self.buffer.offset_v,
            swing_headroom_v=self.buffer.swing_headroom_v,
            ceiling_margin_v=self.buffer.ceiling_margin_v,
            vdd_nominal_v=self.buffer.vdd_v,
        )

    def sense_params(self) -> SenseParams:
        return SenseParams(
            sa_offset_mu_v=self.variation.sa_offset_mu_v,
            sa_offset_sigma_v=self.variation.sa_offset_sigma_v,
            sa_threshold_v=self.schedule.sa_threshold_v,
            noise_sigma_v=self.schedule.noise_sigma_v,
        )

    def mode(self) -> Mode:
        return Mode(self.schedule.mode)

    def emodel(self) -> EModelParams:
        return EModelParams(self.reliability.a_per_s, self.reliability.b_volts)

    def write_model(self) -> WriteModel:
        w = self.reliability.write
        return WriteModel(w.latency_mu_ns, w.latency_sigma_ns, w.margin_k,
                          w.write_current_ua)

    # ------------------------------------------------------------------
    # Validation / serialization
    # ------------------------------------------------------------------

    def validate(self) -> "RunConfig":
        _check_range("ramp.slope_ua_ns", self.ramp.slope_ua_ns, RAMP_SLOPE_RANGE)
        _check_range("ramp.f_clk_mhz", self.ramp.f_clk_mhz, F_CLK_RANGE)
        if self.ramp.wl_cycles < self.schedule.divider:
            raise ConfigError("ramp.wl_cycles must be >= schedule.divider")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.array.n_bits < 1:
            raise ConfigError("array.n_bits must be >= 1")
        if self.array.flavor not in ("LO", "HI", "BOTH"):
            raise ConfigError("array.flavor must be LO, HI or BOTH")
        if self.array.pattern not in ("ALL0", "ALL1", "CHECKER", "RANDOM"):
            raise ConfigError("array.pattern must be ALL0/ALL1/CHECKER/RANDOM")
        _check_range("array.tmr_pct", self.array.tmr_pct, TMR_RANGE_CONV)
        if self.schedule.mode not in ("SINGLE", "DOUBLE"):
            raise ConfigError("schedule.mode must be SINGLE or DOUBLE")
        if self.sweep.knob not in SWEEP_KNOBS:
            raise ConfigError(f"sweep.knob must be one of {sorted(SWEEP_KNOBS)}")
        if not self.sweep.values:
            raise ConfigError("sweep.values must be non-empty")
        rng = SWEEP_KNOBS[self.sweep.knob]
        if rng is not None:
            for v in self.sweep.values:
                _check_range(f"sweep value for {self.sweep.knob}", v, rng)
        for vdd in (*self.shmoo.vdd_values, *self.chips.vdd_values):
            _check_range("vdd", vdd, VDD_RANGE)
        for name, sec in self.conv.per_flavor.items():
            for v in (*sec.sweep, sec.v_clamp_v):
                if not (self.conv.v_tn_v < v <= self.buffer.vdd_v):
                    raise ConfigError(
                        f"conv v_clamp {v} for {name} outside "
                        f"({self.conv.v_tn_v}, {self.buffer.vdd_v}]"
                    )
        self.device.path_curve("waveform")
        self.device.path_curve("conv")
        self.variation_spec()
        self.ramp_config()
        self.buffer_model()
        self.emodel()
        self.write_model()
        return self

    def to_dict(self) -> dict:
        return _to_jsonable(self)

    def config_hash(self) -> str:
        """Hash of the physics-relevant configuration.

        Worker count and output location never change results, so they are
        excluded; identical experiments hash identically regardless of how
        they were parallelized or where they wrote.
        """
        blob = json.dumps(self.echo_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def echo_dict(self) -> dict:
        doc = self.to_dict()
        doc.pop("workers", None)
        doc.pop("output_dir", None)
        return doc


SWEEP_KNOBS = {
    "V_CLAMP": None,  # validated against (v_tn, vdd] separately
    "TMR": TMR_RANGE_CONV,
    "F_CLK": F_CLK_RANGE,
    "RAMP_SLOPE": RAMP_SLOPE_RANGE,
    "T_SW_CYCLES": (float(T_SW_CYCLES_RANGE[0]), float(T_SW_CYCLES_RANGE[1])),
    "VDD": VDD_RANGE,
}


def _check_range(name: str, value: float, rng: Tuple[float, float]) -> None:
    lo, hi = rng
    if not (lo <= value <= hi):
        raise ConfigError(f"{name}={value} outside the documented range [{lo}, {hi}]")


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def _from_mapping(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        kwargs[name] = _convert(f.type, data[name], f"{where}.{name}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _convert(ftype, value, where: str):
    # dataclass field types arrive as strings under `from __future__ annotations`
    tname = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    if tname in _DATACLASS_BY_NAME:
        return _from_mapping(_DATACLASS_BY_NAME[tname], value, where)
    if tname.startswith("Dict[str, FlavorConfig]"):
        return {k: _from_mapping(FlavorConfig, v, f"{where}.{k}") for k, v in value.items()}
    if tname.startswith("Dict[str, ConvFlavorSection]"):
        return {k: _from_mapping(ConvFlavorSection, v, f"{where}.{k}")
                for k, v in value.items()}
    if tname.startswith("Dict[str, float]"):
        return {str(k): float(v) for k, v in value.items()}
    if tname.startswith("Tuple[Tuple[float, float], ...]"):
        return tuple((float(a), float(b)) for a, b in value)
    if tname.startswith("Tuple[float, ...]"):
        return tuple(float(v) for v in value)
    if tname == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected an integer")
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{where}: expected an integer")
        return int(value)
    if tname == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tname == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
        return value
    if tname == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    raise ConfigError(f"{where}: unsupported config field type {tname}")


_DATACLASS_BY_NAME = {
    cls.__name__: cls
    for cls in (
        FlavorConfig, DeviceConfig, VariationConfig, RampSection, BufferSection,
        ScheduleSection, ConvFlavorSection, ConvSection, ArraySection,
        SweepSection, ShmooSection, ChipsSection, WriteSection,
        ReliabilitySection,
    )
}


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from a (possibly partial) dict."""
    cfg = _from_mapping(RunConfig, data, "config")
    return cfg.validate()


def parse_config(path) -> RunConfig:
    """Load, default, and validate a JSON config file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc}") from exc
    return config_from_dict(data)
