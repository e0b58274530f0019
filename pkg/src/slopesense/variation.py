"""Seed-stable sampling of per-bit, per-chip and reference-cell variation.

Per-bit draws follow a two-factor lognormal model.  A common process
shock (tunnel-oxide thickness + junction area, shared by both resistance
states of one cell) and a per-state independent shock are combined with
loadings calibrated in closed form so that the sampled population hits
the target statistics exactly in expectation:

* relative sigma of r_low and r_high per state,
* mean and sigma of the zero-bias TMR distribution.

Anchoring: E[r_high] equals the nominal zero-bias r_high0 and E[TMR]
equals the flavor's TMR target; the r_low mean floats to whatever those
two imply.  With every sigma at zero the sampler returns the nominals
verbatim.

All randomness flows through numpy Generators derived from a SeedTree,
so any draw is a pure function of (master_seed, derivation path) and
parallel execution order can never change a drawn value.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from slopesense.device import (
    DeviceSample,
    Flavor,
    MtjNominal,
    SWITCHING_TRUNCATION_SIGMA,
    tmr_of,
)
from slopesense.errors import ConfigError


# ---------------------------------------------------------------------------
# Deterministic RNG derivation
# ---------------------------------------------------------------------------

def _encode_path(path) -> Tuple[int, ...]:
    out = []
    for item in path:
        if isinstance(item, str):
            out.append(zlib.crc32(item.encode("utf-8")))
        elif isinstance(item, (int, np.integer)):
            out.append(int(item) & 0xFFFFFFFFFFFFFFFF)
        else:
            raise ConfigError(f"rng path elements must be int or str, got {item!r}")
    return tuple(out)


@dataclass(frozen=True)
class SeedTree:
    """Derives independent, reproducible substreams from one master seed."""

    master_seed: int

    def rng(self, *path) -> np.random.Generator:
        ss = np.random.SeedSequence([self.master_seed & 0xFFFFFFFFFFFFFFFF,
                                     *_encode_path(path)])
        return np.random.Generator(np.random.PCG64(ss))


def derive_rng(tree: SeedTree, *path) -> np.random.Generator:
    return tree.rng(*path)


# ---------------------------------------------------------------------------
# Variation specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlavorVariation:
    """Per-flavor nominal cell plus distribution targets."""

    nominal: MtjNominal
    sigma_low_frac: float   # relative one-sigma of r_low
    sigma_high_frac: float  # relative one-sigma of r_high
    tmr_mean_pct: float     # mean zero-bias TMR of the natural population
    tmr_sigma_pp: float     # one-sigma of zero-bias TMR, percent points
    t_sw_mu_ns: float       # switching-time mean at the reference slope
    t_sw_sigma_ns: float    # switching-time sigma at the reference slope

    def __post_init__(self):
        for name in ("sigma_low_frac", "sigma_high_frac"):
            v = getattr(self, name)
            if not (0.0 <= v < 0.5):
                raise ConfigError(f"{name} must be in [0, 0.5), got {v}")
        if self.tmr_mean_pct <= 0:
            raise ConfigError("tmr_mean_pct must be positive")
        if self.tmr_sigma_pp < 0:
            raise ConfigError("tmr_sigma_pp must be >= 0")
        if self.t_sw_mu_ns <= 0 or self.t_sw_sigma_ns < 0:
            raise ConfigError("bad switching-time parameters")


@dataclass(frozen=True)
class VariationSpec:
    flavors: Dict[Flavor, FlavorVariation]
    tox_k: float = 4.0            # log-resistance sensitivity to relative tox
    poly_sigma_intra: float = 0.08
    poly_corner_span: float = 0.15
    sa_offset_mu_v: float = 0.008
    sa_offset_sigma_v: float = 0.016
    mimic_poly: bool = False      # draw resistances directly at poly sigma
    t_sw_read_sigma_ns: float = 0.0  # per-read thermal spread (on top of device)

    def __post_init__(self):
        for name in ("poly_sigma_intra", "poly_corner_span"):
            v = getattr(self, name)
            if not (0.0 <= v < 0.5):
                raise ConfigError(f"{name} must be in [0, 0.5), got {v}")


@dataclass(frozen=True)
class ChipSample:
    """Per-die corner: multiplicative shift on all nominal resistances."""

    chip_index: int
    corner_shift: float

    def __post_init__(self):
        if self.chip_index < 0:
            raise ConfigError("chip_index must be >= 0")


def sample_chip(spec: VariationSpec, chip_index: int, master_seed: int) -> ChipSample:
    """Draw the die's corner shift, uniform over +/-poly_corner_span."""
    rng = SeedTree(master_seed).rng("chip-corner", chip_index)
    span = spec.poly_corner_span
    shift = float(rng.uniform(-span, span)) if span > 0 else 0.0
    return ChipSample(chip_index, shift)


# ---------------------------------------------------------------------------
# Closed-form loading calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Loadings:
    median_low: float
    median_high: float
    a_low: float    # common-factor loading, log domain
    a_high: float
    b_low: float    # per-state independent loading
    b_high: float

    @property
    def a_mid(self) -> float:
        return 0.5 * (self.a_low + self.a_high)

    @property
    def b_mid(self) -> float:
        return 0.5 * (self.b_low + self.b_high)


def _ln_sigma(rel_sigma: float) -> float:
    return math.sqrt(math.log1p(rel_sigma * rel_sigma))


def solve_loadings(
    r_high0: float,
    sigma_low_frac: float,
    sigma_high_frac: float,
    tmr_mean_pct: float,
    tmr_sigma_pp: float,
) -> _Loadings:
    """Solve the two-factor lognormal loadings from the four targets.

    Moment matching (exact for lognormals):
      var(ln r_x)          = a_x^2 + b_x^2
      cov(ln r_l, ln r_h)  = a_l * a_h
      E[r_h]               = median_h * exp(var_h / 2) = r_high0
      E[r_h/r_l]           = (median_h/median_l) * exp(var_d / 2) = 1 + tmr/100
    where var_d = var_l + var_h - 2 cov is pinned by the TMR sigma target.
    """
    ratio_mean = 1.0 + tmr_mean_pct / 100.0
    var_l = _ln_sigma(sigma_low_frac) ** 2
    var_h = _ln_sigma(sigma_high_frac) ** 2
    var_d = _ln_sigma((tmr_sigma_pp / 100.0) / ratio_mean) ** 2

    cov = 0.5 * (var_l + var_h - var_d)
    sig_l, sig_h = math.sqrt(var_l), math.sqrt(var_h)
    if cov < 0 or cov > sig_l * sig_h + 1e-15:
        raise ConfigError(
            "infeasible variation targets: implied |correlation| exceeds 1 "
            f"(cov={cov:.4g}, sigmas={sig_l:.4g}/{sig_h:.4g})"
        )

    if cov == 0.0 or sig_l == 0.0 or sig_h == 0.0:
        a_l = a_h = 0.0
    else:
        # a_high can lie anywhere in [cov/sig_l, sig_h]; load the high state
        # fully onto the common factor (maximal common-mode split), which
        # keeps the state-to-state resistance gap as tight as the targets
        # allow -- cells track their neighbours through shared process.
        a_h = sig_h
        a_l = min(cov / a_h, sig_l)
    b_l = math.sqrt(max(0.0, var_l - a_l * a_l))
    b_h = math.sqrt(max(0.0, var_h - a_h * a_h))

    median_h = r_high0 * math.exp(-var_h / 2.0)
    median_l = median_h * math.exp(var_d / 2.0) / ratio_mean
    return _Loadings(median_l, median_h, a_l, a_h, b_l, b_h)


# ---------------------------------------------------------------------------
# Device sampler
# ---------------------------------------------------------------------------

class DeviceSampler:
    """Draws DeviceSamples for one flavor, optionally TMR-trimmed.

    `tmr_override_pct` mimics the chip's resistor-trim feature: it rescales
    the nominal r_high (and the TMR mean anchor) to the requested zero-bias
    TMR while keeping the relative spreads.
    `corner_shift` multiplies both nominal resistances (per-die corner).
    """

    def __init__(
        self,
        spec: VariationSpec,
        flavor: Flavor,
        tmr_override_pct: Optional[float] = None,
        corner_shift: float = 0.0,
    ):
        if flavor not in spec.flavors:
            raise ConfigError(f"no variation entry for flavor {flavor}")
        fv = spec.flavors[flavor]
        self.spec = spec
        self.flavor = flavor
        self.fv = fv

        corner = 1.0 + corner_shift
        nat_ratio = 1.0 + fv.tmr_mean_pct / 100.0
        ratio = nat_ratio if tmr_override_pct is None else 1.0 + tmr_override_pct / 100.0
        self.tmr_target = 100.0 * (ratio - 1.0)
        self.r_low0 = fv.nominal.r_low0 * corner
        # Zero-bias high anchor used by the degenerate and poly-mimic paths;
        # the trim knob sets the nominal TMR directly.
        self.r_high0 = (
            fv.nominal.r_high0 * corner
            if tmr_override_pct is None
            else self.r_low0 * ratio
        )

        self._degenerate = (
            fv.sigma_low_frac == 0.0
            and fv.sigma_high_frac == 0.0
            and fv.tmr_sigma_pp == 0.0
        )
        if not self._degenerate and not spec.mimic_poly:
            # Natural population anchors E[r_high]=r_high0, E[TMR]=target.
            load = solve_loadings(
                fv.nominal.r_high0 * corner,
                fv.sigma_low_frac, fv.sigma_high_frac,
                fv.tmr_mean_pct, fv.tmr_sigma_pp,
            )
            if tmr_override_pct is not None:
                # The trim rescales only the high-state distribution; r_low
                # stays put and the relative TMR spread is preserved.
                var_d = math.log1p(((fv.tmr_sigma_pp / 100.0) / nat_ratio) ** 2)
                median_high = load.median_low * ratio * math.exp(-var_d / 2.0)
                load = _Loadings(
                    load.median_low, median_high,
                    load.a_low, load.a_high, load.b_low, load.b_high,
                )
            self._load = load
        else:
            self._load = None

        nom = fv.nominal
        w_t = spec.tox_k * nom.tox_sigma_frac
        w_a = nom.area_sigma_frac
        norm = math.hypot(w_t, w_a)
        self._w_tox = w_t / norm if norm > 0 else 0.0
        self._w_area = w_a / norm if norm > 0 else 0.0

    def _common_factor(self, rng: np.random.Generator) -> float:
        z_tox = rng.standard_normal()
        z_area = rng.standard_normal()
        return self._w_tox * z_tox + self._w_area * z_area

    def _draw_t_sw(self, rng: np.random.Generator) -> float:
        fv = self.fv
        if fv.t_sw_sigma_ns == 0.0:
            return fv.t_sw_mu_ns
        while True:
            z = rng.standard_normal()
            if abs(z) > SWITCHING_TRUNCATION_SIGMA:
                continue
            t = fv.t_sw_mu_ns + fv.t_sw_sigma_ns * z
            if t > 0:
                return t

    def sample(
        self,
        rng: np.random.Generator,
        u_shared: float = 0.0,
        shared_frac: float = 0.0,
    ) -> DeviceSample:
        """Draw one cell.

        `u_shared`/`shared_frac` blend a column-shared common shock into
        the cell's process factor (used by the conventional-sensing path
        where reference and data cells of one global column track).
        """
        if self._degenerate:
            t_sw = self._draw_t_sw(rng)
            return DeviceSample.from_resistances(
                self.r_low0, self.r_high0, t_sw, self.spec.t_sw_read_sigma_ns
            )

        if self.spec.mimic_poly:
            s = self.spec.poly_sigma_intra
            z_l = rng.standard_normal()
            z_h = rng.standard_normal()
            r_l = self.r_low0 * math.exp(s * z_l - s * s / 2.0)
            r_h = self.r_high0 * math.exp(s * z_h - s * s / 2.0)
            r_h = max(r_h, r_l * 1.001)  # keep the state ordering physical
            t_sw = self._draw_t_sw(rng)
            return DeviceSample.from_resistances(
                r_l, r_h, t_sw, self.spec.t_sw_read_sigma_ns
            )

        u_local = self._common_factor(rng)
        u = math.sqrt(shared_frac) * u_shared + math.sqrt(1.0 - shared_frac) * u_local
        z_l = rng.standard_normal()
        z_h = rng.standard_normal()
        ld = self._load
        r_l = ld.median_low * math.exp(ld.a_low * u + ld.b_low * z_l)
        r_h = ld.median_high * math.exp(ld.a_high * u + ld.b_high * z_h)
        t_sw = self._draw_t_sw(rng)
        return DeviceSample.from_resistances(
            r_l, r_h, t_sw, self.spec.t_sw_read_sigma_ns
        )

    def loadings(self) -> Optional[_Loadings]:
        return self._load


def sample_device(
    spec: VariationSpec,
    flavor: Flavor,
    rng: np.random.Generator,
    tmr_override_pct: Optional[float] = None,
) -> DeviceSample:
    """Convenience wrapper: one cell from a fresh sampler."""
    return DeviceSampler(spec, flavor, tmr_override_pct).sample(rng)


def tmr_guard_band(tmr_values_pct, k: float = 6.0) -> float:
    """Pessimistic mu - k*sigma guard band, reported (never a rejection rule)."""
    arr = np.asarray(tmr_values_pct, dtype=float)
    return float(arr.mean() - k * arr.std(ddof=1))
