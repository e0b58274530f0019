"""Command-line surface.

Subcommands: read, sweep, shmoo, chips, compare, reliability, trace.
Each report command writes CSV (or JSON) plus a rendered figure into the
output directory; exit codes are 0 on success, 2 on configuration errors
and 3 on numeric failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from slopesense import plots, reports
from slopesense.config import RunConfig, config_from_dict, parse_config
from slopesense.device import Flavor
from slopesense.errors import ConfigError, NumericError
from slopesense.experiments import (
    Scheme, TrialPoint, passing_frequency, run_array_trials, run_comparison,
    shmoo, sweep,
)
from slopesense.reliability import (
    EModelParams, breakdown_probability, endurance, half_life_const,
    lifetime_ramp, ramp_hazard, reads_per_second, write_pulse,
)
from slopesense.sensing import Mode, schedule, slope_read
from slopesense.variation import DeviceSampler, SeedTree
from slopesense.waveform import synthesize

_SCHEMES = {
    "conv": Scheme.CONV,
    "slope-single": Scheme.SLOPE_SINGLE,
    "slope-double": Scheme.SLOPE_DOUBLE,
}


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else config_from_dict({})
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out is not None:
        updates["output_dir"] = args.out
    if updates:
        cfg = dataclasses.replace(cfg, **updates).validate()
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _values_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list {text!r}") from exc


def _point_from_args(args) -> TrialPoint:
    kwargs = {}
    for name in ("flavor", "pattern"):
        v = getattr(args, name, None)
        if v is not None:
            kwargs[name] = v
    if getattr(args, "tmr", None) is not None:
        kwargs["tmr_pct"] = args.tmr
    if getattr(args, "bits", None) is not None:
        kwargs["n_bits"] = args.bits
    if getattr(args, "f_clk", None) is not None:
        kwargs["f_clk_mhz"] = args.f_clk
    if getattr(args, "slope", None) is not None:
        kwargs["slope_ua_ns"] = args.slope
    if getattr(args, "vdd", None) is not None:
        kwargs["vdd_v"] = args.vdd
    if getattr(args, "v_clamp", None) is not None:
        kwargs["v_clamp_v"] = args.v_clamp
    return TrialPoint(**kwargs)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_sweep(cfg: RunConfig, args) -> int:
    scheme = _SCHEMES[args.scheme]
    values = _values_list(args.values) if args.values else None
    rows = sweep(cfg, scheme, knob=args.knob, values=values,
                 base_point=_point_from_args(args))
    out = _outdir(cfg)
    csv_path = reports.write_csv(out / "sweep.csv", cfg, reports.SWEEP_HEADER,
                                 reports.sweep_rows(rows))
    reports.write_json(out / "sweep.json", cfg, {
        "scheme": scheme.value,
        "rows": [dataclasses.asdict(r.stats) | {"knob": r.knob, "value": r.value}
                 for r in rows],
        "config": cfg.echo_dict(),
    })
    if not args.no_plots:
        plots.plot_sweep(rows, out / "sweep.png",
                         title=f"{scheme.value} failure ratio vs {rows[0].knob}")
    print(f"wrote {csv_path}")
    for r in rows:
        print(f"  {r.knob}={r.value:g}: sm0={r.stats.sm0_fails} "
              f"sm1={r.stats.sm1_fails} ratio={r.stats.failure_ratio:.3g}")
    return 0


def _cmd_shmoo(cfg: RunConfig, args) -> int:
    scheme = _SCHEMES[args.scheme]
    cells = shmoo(cfg, scheme)
    out = _outdir(cfg)
    reports.write_csv(out / "shmoo.csv", cfg, reports.SHMOO_HEADER,
                      reports.shmoo_rows(cells))
    grid_txt = reports.shmoo_text_grid(cells)
    (out / "shmoo.txt").write_text(grid_txt, newline="\n")
    if not args.no_plots:
        plots.plot_shmoo(cells, out / "shmoo.png", title=f"{scheme.value} shmoo")
    print(grid_txt, end="")
    return 0


def _cmd_chips(cfg: RunConfig, args) -> int:
    scheme = _SCHEMES[args.scheme]
    points = passing_frequency(cfg, scheme)
    out = _outdir(cfg)
    path = reports.write_csv(out / "chips.csv", cfg, reports.CHIPS_HEADER,
                             reports.chips_rows(points))
    if not args.no_plots:
        plots.plot_passing_frequency(points, out / "chips.png",
                                     title=f"{scheme.value} passing frequency")
    print(f"wrote {path} ({len(points)} rows)")
    return 0


def _cmd_compare(cfg: RunConfig, args) -> int:
    result = run_comparison(cfg, flavor=args.flavor or "LO",
                            tmr_pct=args.tmr if args.tmr is not None else 100.0,
                            n_bits=args.bits)
    payload = reports.comparison_payload(result)
    out = _outdir(cfg)
    path = reports.write_json(out / "compare.json", cfg, payload)
    if not args.no_plots:
        plots.plot_comparison(payload, out / "compare.png")
    print(json.dumps(payload, indent=2, sort_keys=True))
    print(f"wrote {path}")
    return 0


def _cmd_reliability(cfg: RunConfig, args) -> int:
    rel = cfg.reliability
    p = cfg.emodel()
    dv_dt = rel.ramp_dv_v / (rel.ramp_dt_ns * 1e-9)
    ramp_t = rel.ramp_dt_ns * 1e-9
    report = {"schemes": {}, "write_back": {}, "emodel": {
        "a_per_s": p.a_per_s, "b_volts": p.b_volts}}
    conv = {}
    for name, v in rel.stress_v_const.items():
        life = half_life_const(p, v)
        conv[name] = {
            "stress_v": v,
            "breakdown_rate_per_s": breakdown_probability(p, v),
            "lifetime_s": life,
            "reads_per_second": reads_per_second(rel.read_time_conv_ns * 1e-9),
            "endurance_reads": endurance(life, rel.read_time_conv_ns * 1e-9),
        }
    report["schemes"]["conventional"] = conv
    life_ramp = lifetime_ramp(p, dv_dt, ramp_t)
    # The closed-form hazard vs the expression as printed in the source
    # material (whose second term is dimensionally inconsistent).
    h = ramp_hazard(p, dv_dt, ramp_t)
    h_printed = (
        breakdown_probability(p, dv_dt * ramp_t) * p.b_volts / dv_dt
        - p.a_per_s * p.b_volts * dv_dt
    )
    report["schemes"]["slope"] = {
        "ramp_dv_dt_v_per_s": dv_dt,
        "ramp_duration_s": ramp_t,
        "per_cycle_hazard": h,
        "per_cycle_hazard_as_printed": h_printed,
        "lifetime_s": life_ramp,
        "published_lifetime_s": 1.8e10,
        "reads_per_second": reads_per_second(rel.read_time_slope_ns * 1e-9),
        "endurance_reads": endurance(life_ramp, rel.read_time_slope_ns * 1e-9),
        "endurance_at_published_lifetime": endurance(
            1.8e10, rel.read_time_slope_ns * 1e-9),
    }
    wm = cfg.write_model()
    report["write_back"] = {
        "latency_mu_ns": wm.latency_mu_ns,
        "latency_sigma_ns": wm.latency_sigma_ns,
        "pulse_ns": write_pulse(wm),
        "writes_only_read_ones": True,
    }
    out = _outdir(cfg)
    path = reports.write_json(out / "reliability.json", cfg, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    print(f"wrote {path}")
    return 0


def _trace_device(cfg: RunConfig, args):
    spec = cfg.variation_spec()
    flavor = Flavor(args.flavor or "LO")
    sampler = DeviceSampler(spec, flavor,
                            tmr_override_pct=args.tmr if args.tmr is not None
                            else cfg.array.tmr_pct)
    tree = SeedTree(cfg.master_seed)
    rng = tree.rng("trial", args.bit)
    return sampler.sample(rng), rng


def _cmd_trace(cfg: RunConfig, args) -> int:
    dev, rng = _trace_device(cfg, args)
    ramp = cfg.ramp_config(args.f_clk, args.slope, args.vdd)
    buf = cfg.buffer_model(args.vdd)
    curve = cfg.device.path_curve("waveform")
    stored = args.stored
    trace = synthesize(dev, stored, ramp, buf, curve, rng=rng)
    times = np.arange(0.0, ramp.t_sense_ns + 1e-9, 0.05)
    from slopesense.waveform import ramp_current

    rows = []
    i_ua, v_bit, v_bufo = [], [], []
    for t in times:
        i = ramp_current(float(t), ramp)
        vb = trace.v_bit(float(t))
        vo = trace.v_bufo(float(t))
        i_ua.append(i)
        v_bit.append(vb)
        v_bufo.append(vo)
        rows.append((float(t), i, vb, vo))
    out = _outdir(cfg)
    path = reports.write_csv(out / "trace.csv", cfg,
                             ("t_ns", "i_uA", "v_bit_V", "v_bufo_V"), rows)
    if not args.no_plots:
        sched = schedule(ramp.f_clk_mhz, ramp.wl_cycles, cfg.mode(),
                         divider=cfg.schedule.divider,
                         phase_delay_clocks=cfg.schedule.phase_delay_clocks,
                         second_pair_offset_clocks=cfg.schedule.second_pair_offset_clocks,
                         start_clocks=cfg.schedule.start_clocks)
        s_times = [t for c in sched.circuits for t in c.sample_times]
        s_vals = [trace.v_bufo(t) for t in s_times]
        plots.plot_trace(times, np.array(i_ua), np.array(v_bit), np.array(v_bufo),
                         out / "trace.png", s_times, s_vals,
                         title=f"stored '{stored}', {ramp.slope_ua_ns:g} uA/ns @ "
                               f"{ramp.f_clk_mhz:g} MHz")
    msg = f"wrote {path}"
    if trace.switch_time_ns is not None:
        msg += f" (switch at {trace.switch_time_ns:.2f} ns)"
    print(msg)
    return 0


def _cmd_read(cfg: RunConfig, args) -> int:
    dev, rng = _trace_device(cfg, args)
    ramp = cfg.ramp_config(args.f_clk, args.slope, args.vdd)
    buf = cfg.buffer_model(args.vdd)
    curve = cfg.device.path_curve("waveform")
    sched = schedule(ramp.f_clk_mhz, ramp.wl_cycles, cfg.mode(),
                     divider=cfg.schedule.divider,
                     phase_delay_clocks=cfg.schedule.phase_delay_clocks,
                     second_pair_offset_clocks=cfg.schedule.second_pair_offset_clocks,
                     start_clocks=cfg.schedule.start_clocks)
    res = slope_read(dev, args.stored, ramp, buf, sched, curve,
                     cfg.sense_params(), rng)
    record = {
        "device": {"r_low_ohm": dev.r_low, "r_high_ohm": dev.r_high,
                   "tmr0_pct": dev.tmr0, "t_sw_ref_ns": dev.t_sw_ref},
        "stored_bit": args.stored,
        "read_bit": res.bit,
        "failure_class": res.failure_class.value,
        "post_state": res.post_state.name,
        "switch_time_ns": res.switch_time_ns,
        "clamp_onset_ns": res.clamp_onset_ns,
        "sm0_v": res.sm0_v,
        "sm1_v": res.sm1_v,
        "circuits": [
            {
                "sample_times_ns": list(oc.sample_times),
                "sampled_v": list(oc.samples),
                "diffs_v": list(oc.diffs),
                "latched": list(oc.latched),
                "offset_v": oc.offset_v,
                "bit": oc.bit,
            }
            for oc in res.per_circuit
        ],
    }
    out = _outdir(cfg)
    path = reports.write_json(out / "read.json", cfg, record)
    print(json.dumps({k: record[k] for k in
                      ("stored_bit", "read_bit", "failure_class",
                       "switch_time_ns")}, indent=2))
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slopesense",
        description="Behavioral yield simulator for slope-detection and "
                    "conventional 1T1R array sensing.",
    )
    parser.add_argument("--config", help="JSON config file (defaults committed in-package)")
    parser.add_argument("--seed", type=int, help="override master seed")
    parser.add_argument("--workers", type=int, help="worker process count")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_point_args(p, f_clk=True, v_clamp=False):
        p.add_argument("--flavor", choices=("LO", "HI", "BOTH"))
        p.add_argument("--tmr", type=float, help="zero-bias TMR trim, percent")
        p.add_argument("--bits", type=int, help="trial count override")
        if f_clk:
            p.add_argument("--f-clk", dest="f_clk", type=float)
            p.add_argument("--slope", type=float, help="ramp slope, uA/ns")
            p.add_argument("--vdd", type=float)
        if v_clamp:
            p.add_argument("--v-clamp", dest="v_clamp", type=float)

    p = sub.add_parser("sweep", help="failure-ratio sweep over one knob")
    p.add_argument("--scheme", choices=sorted(_SCHEMES), default="slope-double")
    p.add_argument("--knob", choices=("V_CLAMP", "TMR", "F_CLK", "RAMP_SLOPE",
                                      "T_SW_CYCLES", "VDD"))
    p.add_argument("--values", help="comma-separated knob values")
    add_point_args(p, v_clamp=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("shmoo", help="pass/fail grid over vdd and f_clk")
    p.add_argument("--scheme", choices=sorted(_SCHEMES), default="slope-double")
    p.set_defaults(func=_cmd_shmoo)

    p = sub.add_parser("chips", help="per-chip max passing frequency")
    p.add_argument("--scheme", choices=sorted(_SCHEMES), default="slope-double")
    p.set_defaults(func=_cmd_chips)

    p = sub.add_parser("compare", help="slope vs conventional failure counts")
    p.add_argument("--flavor", choices=("LO", "HI"))
    p.add_argument("--tmr", type=float)
    p.add_argument("--bits", type=int)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("reliability", help="E-model lifetime/endurance report")
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("trace", help="dump one read's waveform as CSV")
    p.add_argument("--bit", type=int, default=1, help="bit index (seeds the device draw)")
    p.add_argument("--stored", type=int, choices=(0, 1), default=1)
    add_point_args(p)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("read", help="single slope read with full debug record")
    p.add_argument("--bit", type=int, default=1)
    p.add_argument("--stored", type=int, choices=(0, 1), default=1)
    add_point_args(p)
    p.set_defaults(func=_cmd_read)

    return parser


def run_command(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
