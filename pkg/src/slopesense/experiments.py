"""Monte-Carlo array experiments: failure sweeps, shmoo, multi-chip studies.

Every trial draws its randomness from a path-derived substream
(master_seed, stream tag, bit index), so results are bit-identical no
matter how the bit range is chunked across workers, and knob sweeps see
common random numbers across their points.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from slopesense.config import (
    RunConfig, TMR_RANGE_CONV, TMR_RANGE_SLOPE, _check_range,
)
from slopesense.conventional import (
    ConvConfig, conventional_read, sample_reference,
)
from slopesense.device import Flavor
from slopesense.errors import ConfigError
from slopesense.sensing import (
    ComparatorInstance, FailureClass, Mode, schedule, slope_read,
)
from slopesense.variation import DeviceSampler, SeedTree, sample_chip


class Scheme(Enum):
    CONV = "CONV"
    SLOPE_SINGLE = "SLOPE_SINGLE"
    SLOPE_DOUBLE = "SLOPE_DOUBLE"

    @property
    def is_slope(self) -> bool:
        return self is not Scheme.CONV


@dataclass(frozen=True)
class FailureStats:
    n_trials: int
    sm0_fails: int
    sm1_fails: int

    @property
    def total_fails(self) -> int:
        return self.sm0_fails + self.sm1_fails

    @property
    def failure_ratio(self) -> float:
        return self.total_fails / self.n_trials if self.n_trials else 0.0

    def __add__(self, other: "FailureStats") -> "FailureStats":
        return FailureStats(
            self.n_trials + other.n_trials,
            self.sm0_fails + other.sm0_fails,
            self.sm1_fails + other.sm1_fails,
        )


@dataclass(frozen=True)
class TrialPoint:
    """Knob overrides for one operating point."""

    f_clk_mhz: Optional[float] = None
    slope_ua_ns: Optional[float] = None
    vdd_v: Optional[float] = None
    v_clamp_v: Optional[float] = None
    t_sw_cycles: Optional[float] = None
    tmr_pct: Optional[float] = None
    flavor: Optional[str] = None
    pattern: Optional[str] = None
    n_bits: Optional[int] = None
    corner_shift: float = 0.0
    stream: Tuple[int, ...] = ()


def _stored_bit(pattern: str, index: int, rng: np.random.Generator) -> int:
    if pattern == "ALL0":
        return 0
    if pattern == "ALL1":
        return 1
    if pattern == "CHECKER":
        return index % 2
    if pattern == "RANDOM":
        return int(rng.integers(0, 2))
    raise ConfigError(f"unknown stored-data pattern {pattern}")


def _flavor_of(array_flavor: str, index: int, n_bits: int) -> Flavor:
    if array_flavor == "BOTH":
        return Flavor.LO if index < n_bits // 2 else Flavor.HI
    return Flavor(array_flavor)


def _effective_spec(cfg: RunConfig, point: TrialPoint):
    """Variation spec with the switching-time knob folded in."""
    spec = cfg.variation_spec()
    if point.t_sw_cycles is None:
        return spec
    f = point.f_clk_mhz if point.f_clk_mhz is not None else cfg.ramp.f_clk_mhz
    t_clk = 1e3 / f
    flavors = {
        fl: replace(fv, t_sw_mu_ns=point.t_sw_cycles * t_clk)
        for fl, fv in spec.flavors.items()
    }
    return replace(spec, flavors=flavors)


def _check_tmr(scheme: Scheme, tmr: float) -> None:
    rng = TMR_RANGE_SLOPE if scheme.is_slope else TMR_RANGE_CONV
    _check_range("tmr_pct", tmr, rng)


def _run_chunk(
    cfg: RunConfig, scheme: Scheme, point: TrialPoint, lo: int, hi: int
) -> Tuple[int, int]:
    """Count (sm0, sm1) failures for bits [lo, hi)."""
    array = cfg.array
    n_bits = point.n_bits if point.n_bits is not None else array.n_bits
    pattern = point.pattern if point.pattern is not None else array.pattern
    flavor_sel = point.flavor if point.flavor is not None else array.flavor
    tmr = point.tmr_pct if point.tmr_pct is not None else array.tmr_pct
    _check_tmr(scheme, tmr)

    spec = _effective_spec(cfg, point)
    tree = SeedTree(cfg.master_seed)
    samplers: Dict[Flavor, DeviceSampler] = {}
    for name in ("LO", "HI") if flavor_sel == "BOTH" else (flavor_sel,):
        fl = Flavor(name)
        samplers[fl] = DeviceSampler(
            spec, fl, tmr_override_pct=tmr, corner_shift=point.corner_shift
        )

    sm0 = sm1 = 0
    if scheme.is_slope:
        mode = Mode.SINGLE if scheme is Scheme.SLOPE_SINGLE else Mode.DOUBLE
        ramp = cfg.ramp_config(point.f_clk_mhz, point.slope_ua_ns, point.vdd_v)
        buf = cfg.buffer_model(point.vdd_v)
        sched = schedule(
            ramp.f_clk_mhz, ramp.wl_cycles, mode,
            divider=cfg.schedule.divider,
            phase_delay_clocks=cfg.schedule.phase_delay_clocks,
            second_pair_offset_clocks=cfg.schedule.second_pair_offset_clocks,
            start_clocks=cfg.schedule.start_clocks,
        )
        curve = cfg.device.path_curve("waveform")
        sense = cfg.sense_params()
        for i in range(lo, hi):
            rng = tree.rng("trial", *point.stream, i)
            fl = _flavor_of(flavor_sel, i, n_bits)
            dev = samplers[fl].sample(rng)
            stored = _stored_bit(pattern, i, rng)
            res = slope_read(dev, stored, ramp, buf, sched, curve, sense, rng)
            if res.failure_class is FailureClass.SM0_FAIL:
                sm0 += 1
            elif res.failure_class is FailureClass.SM1_FAIL:
                sm1 += 1
        return sm0, sm1

    # Conventional sensing: one shared reference per global column.
    curve = cfg.device.path_curve("conv")
    vdd = point.vdd_v if point.vdd_v is not None else cfg.buffer.vdd_v
    conv_cfgs: Dict[Flavor, ConvConfig] = {}
    for fl in samplers:
        sec = cfg.conv.per_flavor[fl.value]
        conv_cfgs[fl] = ConvConfig(
            v_clamp_v=point.v_clamp_v if point.v_clamp_v is not None else sec.v_clamp_v,
            v_tn_v=cfg.conv.v_tn_v,
            r_load_ohm=sec.r_load_ohm,
            v_floor_v=sec.v_floor_v,
            v_ceil_margin_v=cfg.conv.v_ceil_margin_v,
            vdd_v=vdd,
            ref_bias_v=cfg.conv.ref_bias_v,
            ref_bitlines=cfg.conv.ref_bitlines,
            column_tracking=cfg.conv.column_tracking,
        )
    mu = cfg.variation.sa_offset_mu_v
    sigma = cfg.variation.sa_offset_sigma_v
    col_cache: Dict[int, Tuple[float, object]] = {}
    for i in range(lo, hi):
        col = i // 8
        fl = _flavor_of(flavor_sel, i, n_bits)
        cc = conv_cfgs[fl]
        if col not in col_cache:
            u_col = float(tree.rng("col", *point.stream, col).standard_normal())
            ref = sample_reference(
                samplers[fl], cc, curve, tree.rng("ref", *point.stream, col), u_col
            )
            col_cache[col] = (u_col, ref)
        u_col, ref = col_cache[col]
        rng = tree.rng("trial", *point.stream, i)
        dev = samplers[fl].sample(
            rng, u_shared=u_col, shared_frac=cc.tracking_for(fl.value)
        )
        # Offset orientation calibrated: the systematic component favors '0'.
        comp = ComparatorInstance(-mu + sigma * float(rng.standard_normal()))
        stored = _stored_bit(pattern, i, rng)
        res = conventional_read(dev, stored, ref, comp, cc, curve)
        if res.failure_class is FailureClass.SM0_FAIL:
            sm0 += 1
        elif res.failure_class is FailureClass.SM1_FAIL:
            sm1 += 1
    return sm0, sm1


def run_array_trials(
    cfg: RunConfig,
    scheme: Scheme,
    point: TrialPoint = TrialPoint(),
    workers: Optional[int] = None,
) -> FailureStats:
    """Read every bit of the array once at the given operating point."""
    n_bits = point.n_bits if point.n_bits is not None else cfg.array.n_bits
    n_workers = workers if workers is not None else cfg.workers
    if n_workers <= 1 or n_bits < 256:
        sm0, sm1 = _run_chunk(cfg, scheme, point, 0, n_bits)
        return FailureStats(n_bits, sm0, sm1)

    bounds = np.linspace(0, n_bits, n_workers + 1).astype(int)
    chunks = [(int(a), int(b)) for a, b in zip(bounds, bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(_run_chunk, cfg, scheme, point, a, b)
                   for a, b in chunks]
        results = [f.result() for f in futures]  # summed in chunk order
    sm0 = sum(r[0] for r in results)
    sm1 = sum(r[1] for r in results)
    return FailureStats(n_bits, sm0, sm1)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

_KNOB_FIELD = {
    "V_CLAMP": "v_clamp_v",
    "TMR": "tmr_pct",
    "F_CLK": "f_clk_mhz",
    "RAMP_SLOPE": "slope_ua_ns",
    "T_SW_CYCLES": "t_sw_cycles",
    "VDD": "vdd_v",
}


@dataclass(frozen=True)
class SweepRow:
    knob: str
    value: float
    stats: FailureStats


def sweep(
    cfg: RunConfig,
    scheme: Scheme,
    knob: Optional[str] = None,
    values: Optional[Sequence[float]] = None,
    base_point: TrialPoint = TrialPoint(),
    workers: Optional[int] = None,
) -> List[SweepRow]:
    """One run_array_trials per knob value, shared master seed."""
    knob = knob if knob is not None else cfg.sweep.knob
    values = tuple(values) if values is not None else cfg.sweep.values
    if knob not in _KNOB_FIELD:
        raise ConfigError(f"unknown sweep knob {knob}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for v in values:
        point = replace(base_point, **{_KNOB_FIELD[knob]: float(v)})
        rows.append(SweepRow(knob, float(v), run_array_trials(cfg, scheme, point, workers)))
    return rows


# ---------------------------------------------------------------------------
# Multi-chip studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShmooCell:
    vdd_v: float
    f_clk_mhz: float
    failing_chips: int
    n_chips: int

    @property
    def passes(self) -> bool:
        return self.failing_chips == 0


def _chip_passes(
    cfg: RunConfig, scheme: Scheme, chip_index: int, corner: float,
    vdd: float, f: float, n_bits: int, tolerance: int, workers: Optional[int],
) -> bool:
    point = TrialPoint(
        f_clk_mhz=f, vdd_v=vdd, n_bits=n_bits,
        corner_shift=corner, stream=(chip_index,),
    )
    stats = run_array_trials(cfg, scheme, point, workers=workers)
    return stats.total_fails <= tolerance


def shmoo(
    cfg: RunConfig,
    scheme: Scheme,
    workers: Optional[int] = None,
) -> List[ShmooCell]:
    """Pass/fail grid over supply voltage and clock frequency."""
    spec = cfg.variation_spec()
    sh = cfg.shmoo
    corners = [
        sample_chip(spec, c, cfg.master_seed).corner_shift
        for c in range(sh.n_chips)
    ]
    cells = []
    for vdd in sh.vdd_values:
        for f in sh.f_values:
            failing = sum(
                not _chip_passes(cfg, scheme, c, corners[c], vdd, f,
                                 sh.n_bits, sh.pass_tolerance, workers)
                for c in range(sh.n_chips)
            )
            cells.append(ShmooCell(vdd, f, failing, sh.n_chips))
    return cells


@dataclass(frozen=True)
class PassingFrequency:
    chip: int
    vdd_v: float
    f_max_mhz: float  # 0 when no grid point passes


def passing_frequency(
    cfg: RunConfig,
    scheme: Scheme,
    workers: Optional[int] = None,
) -> List[PassingFrequency]:
    """Maximum passing clock per chip and supply.

    Binary search over the frequency grid for the upper edge of the pass
    region; assumes the pass region is contiguous around the mid-grid
    anchor (true for the committed calibration).
    """
    spec = cfg.variation_spec()
    ch = cfg.chips
    f_grid = np.arange(ch.f_min_mhz, ch.f_max_mhz + 0.5 * ch.f_step_mhz, ch.f_step_mhz)
    corners = [
        sample_chip(spec, c, cfg.master_seed).corner_shift
        for c in range(ch.n_chips)
    ]
    out = []
    for vdd in ch.vdd_values:
        for c in range(ch.n_chips):
            def passes(idx: int) -> bool:
                return _chip_passes(cfg, scheme, c, corners[c], vdd,
                                    float(f_grid[idx]), ch.n_bits,
                                    cfg.shmoo.pass_tolerance, workers)

            lo, hi = 0, len(f_grid) - 1
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if passes(mid):
                    lo = mid
                else:
                    hi = mid - 1
            f_max = float(f_grid[lo]) if passes(lo) else 0.0
            out.append(PassingFrequency(c, vdd, f_max))
    return out


# ---------------------------------------------------------------------------
# Scheme comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Comparison:
    conv: FailureStats
    slope: FailureStats
    reduction_factor: float
    smoothed: bool


def compare(conv: FailureStats, slope: FailureStats) -> Comparison:
    """Failure-count reduction of slope sensing vs the conventional baseline.

    When slope sensing shows zero failures the ratio uses a count of one
    (additive-one smoothing) and is flagged; raw counts ride along.
    """
    smoothed = slope.total_fails == 0
    denom = max(slope.total_fails, 1)
    return Comparison(conv, slope, conv.total_fails / denom, smoothed)


def run_comparison(
    cfg: RunConfig,
    flavor: str = "LO",
    tmr_pct: float = 100.0,
    n_bits: Optional[int] = None,
    workers: Optional[int] = None,
) -> Comparison:
    """Both schemes on the same array and seed at committed defaults."""
    point = TrialPoint(flavor=flavor, tmr_pct=tmr_pct, n_bits=n_bits)
    conv_stats = run_array_trials(cfg, Scheme.CONV, point, workers)
    slope_stats = run_array_trials(cfg, Scheme.SLOPE_DOUBLE, point, workers)
    return compare(conv_stats, slope_stats)
