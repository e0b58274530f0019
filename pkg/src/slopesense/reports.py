"""Deterministic result emission: CSV, JSON, and the human-diffable shmoo grid.

Every output file embeds the effective config hash and the master seed in
a leading comment (CSV) or top-level fields (JSON).  Numbers are written
with repr-stable formatting so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List, Sequence

from slopesense.config import RunConfig
from slopesense.experiments import (
    Comparison, PassingFrequency, ShmooCell, SweepRow,
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(
    path: Path,
    cfg: RunConfig,
    header: Sequence[str],
    rows: Iterable[Sequence],
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# config_sha256={cfg.config_hash()} master_seed={cfg.master_seed}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")
    return path


def write_json(path: Path, cfg: RunConfig, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "config_sha256": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        **payload,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", newline="\n")
    return path


def sweep_rows(rows: Sequence[SweepRow]) -> List[Sequence]:
    return [
        (r.knob, r.value, r.stats.n_trials, r.stats.sm0_fails,
         r.stats.sm1_fails, r.stats.failure_ratio)
        for r in rows
    ]


SWEEP_HEADER = ("knob", "value", "n_bits", "sm0_fails", "sm1_fails", "failure_ratio")


def shmoo_rows(cells: Sequence[ShmooCell]) -> List[Sequence]:
    return [
        (c.vdd_v, c.f_clk_mhz, c.failing_chips, c.n_chips, c.passes)
        for c in cells
    ]


SHMOO_HEADER = ("vdd_v", "f_clk_mhz", "failing_chips", "n_chips", "pass")


def chips_rows(points: Sequence[PassingFrequency]) -> List[Sequence]:
    return [(p.chip, p.vdd_v, p.f_max_mhz) for p in points]


CHIPS_HEADER = ("chip", "vdd_v", "f_max_mhz")


def shmoo_text_grid(cells: Sequence[ShmooCell]) -> str:
    """Aligned text grid: '.' all chips pass, else the failing-chip count."""
    vdds = sorted({c.vdd_v for c in cells}, reverse=True)
    freqs = sorted({c.f_clk_mhz for c in cells})
    lookup = {(c.vdd_v, c.f_clk_mhz): c for c in cells}
    width = 5
    out = ["vdd\\f " + "".join(f"{f:>{width}.0f}" for f in freqs)]
    for v in vdds:
        cells_txt = []
        for f in freqs:
            c = lookup[(v, f)]
            cells_txt.append(f"{'.' if c.passes else c.failing_chips:>{width}}")
        out.append(f"{v:5.2f} " + "".join(cells_txt))
    return "\n".join(out) + "\n"


def comparison_payload(result: Comparison) -> dict:
    return {
        "conventional": {
            "n_bits": result.conv.n_trials,
            "sm0_fails": result.conv.sm0_fails,
            "sm1_fails": result.conv.sm1_fails,
            "failure_ratio": result.conv.failure_ratio,
        },
        "slope": {
            "n_bits": result.slope.n_trials,
            "sm0_fails": result.slope.sm0_fails,
            "sm1_fails": result.slope.sm1_fails,
            "failure_ratio": result.slope.failure_ratio,
        },
        "reduction_factor": result.reduction_factor,
        "smoothed": result.smoothed,
    }
