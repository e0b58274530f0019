"""Matplotlib figure rendering for the report path.

Each CLI report command drops a PNG next to its delimited output.  The
CSV stays the canonical (byte-deterministic) artifact; figures are a
convenience view of the same data.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from slopesense.experiments import PassingFrequency, ShmooCell, SweepRow

plt.rcParams.update({
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 140,
    "axes.grid": True,
    "grid.linewidth": 0.4,
    "grid.alpha": 0.5,
    "font.size": 9,
    "lines.linewidth": 1.4,
    "lines.markersize": 4.5,
})

_KNOB_LABEL = {
    "V_CLAMP": "clamp voltage (V)",
    "TMR": "TMR (%)",
    "F_CLK": "clock frequency (MHz)",
    "RAMP_SLOPE": "ramp current slope (uA/ns)",
    "T_SW_CYCLES": "switching time (clock cycles)",
    "VDD": "supply voltage (V)",
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_sweep(rows: Sequence[SweepRow], path: Path, title: str = "") -> Path:
    values = [r.value for r in rows]
    n = rows[0].stats.n_trials
    sm0 = [r.stats.sm0_fails / n for r in rows]
    sm1 = [r.stats.sm1_fails / n for r in rows]
    tot = [r.stats.failure_ratio for r in rows]

    fig, ax = plt.subplots()
    floor = 0.5 / n  # display floor for zero counts on the log axis
    ax.semilogy(values, np.maximum(tot, floor), "ko-", label="total")
    ax.semilogy(values, np.maximum(sm0, floor), "rs--", label="SM0")
    ax.semilogy(values, np.maximum(sm1, floor), "b^--", label="SM1")
    ax.set_xlabel(_KNOB_LABEL.get(rows[0].knob, rows[0].knob))
    ax.set_ylabel("failure ratio")
    ax.set_ylim(bottom=floor * 0.5)
    if title:
        ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def plot_shmoo(cells: Sequence[ShmooCell], path: Path, title: str = "") -> Path:
    vdds = sorted({c.vdd_v for c in cells})
    freqs = sorted({c.f_clk_mhz for c in cells})
    grid = np.zeros((len(vdds), len(freqs)))
    for c in cells:
        grid[vdds.index(c.vdd_v), freqs.index(c.f_clk_mhz)] = c.failing_chips

    fig, ax = plt.subplots()
    im = ax.imshow(
        grid, origin="lower", aspect="auto", cmap="RdYlGn_r",
        vmin=0, vmax=max(1, cells[0].n_chips),
        extent=(min(freqs), max(freqs), min(vdds), max(vdds)),
    )
    for c in cells:
        if c.failing_chips:
            ax.text(c.f_clk_mhz, c.vdd_v, str(c.failing_chips),
                    ha="center", va="center", fontsize=7)
    ax.set_xlabel("clock frequency (MHz)")
    ax.set_ylabel("supply voltage (V)")
    fig.colorbar(im, ax=ax, label=f"failing chips / {cells[0].n_chips}")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_passing_frequency(
    points: Sequence[PassingFrequency], path: Path, title: str = ""
) -> Path:
    vdds = sorted({p.vdd_v for p in points})
    fig, ax = plt.subplots()
    for v in vdds:
        chips = [p for p in points if p.vdd_v == v]
        ax.plot([p.chip for p in chips], [p.f_max_mhz for p in chips],
                "o-", label=f"vdd={v:.2f} V")
    ax.set_xlabel("chip")
    ax.set_ylabel("max passing frequency (MHz)")
    if title:
        ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def plot_trace(
    times_ns: np.ndarray,
    i_ua: np.ndarray,
    v_bit: np.ndarray,
    v_bufo: np.ndarray,
    path: Path,
    sample_times: Optional[Sequence[float]] = None,
    sampled_values: Optional[Sequence[float]] = None,
    title: str = "",
) -> Path:
    fig, (ax_v, ax_i) = plt.subplots(
        2, 1, sharex=True, figsize=(6.0, 5.0),
        gridspec_kw={"height_ratios": [3, 1]},
    )
    ax_v.plot(times_ns, v_bit, "b-", label="bitcell node")
    ax_v.plot(times_ns, v_bufo, "k-", label="buffer output")
    if sample_times is not None and sampled_values is not None:
        ax_v.plot(sample_times, sampled_values, "rv", label="sampled")
    ax_v.set_ylabel("voltage (V)")
    ax_v.legend(loc="lower right")
    if title:
        ax_v.set_title(title)
    ax_i.plot(times_ns, i_ua, "g-")
    ax_i.set_xlabel("time (ns)")
    ax_i.set_ylabel("ramp current (uA)")
    return _save(fig, path)


def plot_comparison(payload: dict, path: Path, title: str = "") -> Path:
    labels = ["conventional", "slope"]
    counts = [
        payload["conventional"]["sm0_fails"] + payload["conventional"]["sm1_fails"],
        payload["slope"]["sm0_fails"] + payload["slope"]["sm1_fails"],
    ]
    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    ax.bar(labels, np.maximum(counts, 0.5), color=["#888888", "#2c7fb8"])
    ax.set_yscale("log")
    ax.set_ylabel("failure count")
    note = f"{payload['reduction_factor']:.0f}x reduction"
    if payload["smoothed"]:
        note += " (slope count smoothed to 1)"
    ax.set_title(title or note)
    return _save(fig, path)
