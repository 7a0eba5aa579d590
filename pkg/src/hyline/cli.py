"""Command line: ``hyline run|sweep|threshold|report``.

Exit codes: 0 success, 1 some sweep cells failed, 2 configuration error,
3 simulation deadlock.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import metrics
from .config import ConfigError, ExperimentConfig, load_config, parse_override
from .report import RunReport
from .simengine import DeadlockError, run
from .threshold import ThresholdInputs, compute_band, wait_curve
from .workload import generate_trace

log = logging.getLogger("hyline")

EXIT_OK, EXIT_CELLS_FAILED, EXIT_CONFIG, EXIT_DEADLOCK = 0, 1, 2, 3

MERGED_COLUMNS = ("scheme", "load", "seed", "bin", "mean_nfct", "p99_nfct", "count", "app_tput")
AGG_COLUMNS = (
    "scheme",
    "load",
    "bin",
    "seeds",
    "mean_nfct",
    "mean_nfct_std",
    "p99_nfct",
    "p99_nfct_std",
    "app_tput",
    "app_tput_std",
)


def _mode_for(scheme: str) -> str:
    return "hyline" if scheme.startswith("hyline") else scheme


def run_cell(cfg: ExperimentConfig, scheme: str, load: float, seed: int, out: Path) -> metrics.MetricsSummary:
    """One simulation; writes trace, report, stats and summary CSVs into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    topo = cfg.topology()
    trace = generate_trace(cfg.workload(load, seed), topo)
    params = cfg.sim_params(scheme, seed)
    t0 = time.time()
    rep = run(topo, trace, _mode_for(scheme), params)
    rep.scheme = scheme
    log.info("%s load=%g seed=%d took %.1fs", scheme, load, seed, time.time() - t0)
    trace.to_csv(out / "trace.csv")
    rep.to_csv(out / "report.csv")
    rep.write_stats(out / "stats.csv")
    summ = metrics.summarize(rep, topo, load)
    if summ.man_stats:
        metrics.write_man_stats(summ, out / "man_stats.csv")
    # summary last: its presence marks the cell complete
    tmp = out / "summary.csv.tmp"
    metrics.write_summary(summ, tmp)
    os.replace(tmp, out / "summary.csv")
    return summ


def _cell_dir(root: Path, scheme: str, load: float, seed: int) -> Path:
    return root / "cells" / f"{scheme}_load{load:g}_seed{seed}"


def _cell_job(args):
    raw, scheme, load, seed, out = args
    logging.basicConfig(level=logging.WARNING)
    cfg = ExperimentConfig(raw)
    try:
        run_cell(cfg, scheme, load, seed, Path(out))
        return scheme, load, seed, None
    except Exception as e:  # recorded per cell
        return scheme, load, seed, f"{type(e).__name__}: {e}"


def merge_sweep(root: Path, cells) -> int:
    """Write merged.csv (one 'all' row per finished cell) and aggregate.csv."""
    merged = []
    per_key: Dict[tuple, List[Dict]] = {}
    for scheme, load, seed in cells:
        path = _cell_dir(root, scheme, load, seed) / "summary.csv"
        if not path.exists():
            continue
        for row in metrics.read_rows(path):
            per_key.setdefault((scheme, load, row["bin"]), []).append(row)
            if row["bin"] == metrics.ALL:
                merged.append({**row, "seed": seed})
    metrics.write_rows(merged, root / "merged.csv", MERGED_COLUMNS)
    agg = []
    for (scheme, load, b), rows in per_key.items():
        def ms(key):
            v = np.array([r[key] for r in rows])
            return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0

        mean, mean_sd = ms("mean_nfct")
        p99, p99_sd = ms("p99_nfct")
        tp, tp_sd = ms("app_tput")
        agg.append(
            {
                "scheme": scheme,
                "load": load,
                "bin": b,
                "seeds": len(rows),
                "mean_nfct": mean,
                "mean_nfct_std": mean_sd,
                "p99_nfct": p99,
                "p99_nfct_std": p99_sd,
                "app_tput": tp,
                "app_tput_std": tp_sd,
            }
        )
    metrics.write_rows(agg, root / "aggregate.csv", AGG_COLUMNS)
    return len(merged)


# -- subcommands -------------------------------------------------------------


def cmd_run(cfg: ExperimentConfig, args) -> int:
    out = Path(cfg.out)
    w = cfg.raw["workload"]
    try:
        summ = run_cell(cfg, cfg.mode, float(w["load"]), int(w["seed"]), out)
    except DeadlockError as e:
        print(f"deadlock: {e}", file=sys.stderr)
        return EXIT_DEADLOCK
    row = summ.bins.get(metrics.ALL)
    if row:
        print(
            f"{cfg.mode} load={w['load']:g}: mean nFCT {row.mean_nfct:.4f}, "
            f"p99 {row.p99_nfct:.4f}, app throughput {row.app_tput:.4f} ({row.count} flows)"
        )
    print(f"wrote {out / 'report.csv'} and {out / 'summary.csv'}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    root = Path(cfg.out)
    schemes, loads, seeds = cfg.sweep_axes()
    cells = [(s, l, d) for s in schemes for l in loads for d in seeds]
    todo = [c for c in cells if not (_cell_dir(root, *c) / "summary.csv").exists()]
    skipped = len(cells) - len(todo)
    if skipped:
        print(f"skipping {skipped} completed cells")
    jobs = args.jobs or min(len(todo), os.cpu_count() or 1) or 1
    work = [(cfg.raw, s, l, d, str(_cell_dir(root, s, l, d))) for s, l, d in todo]
    failures = []
    if jobs <= 1:
        results = map(_cell_job, work)
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_cell_job, work)
    for scheme, load, seed, err in results:
        status = "ok" if err is None else f"FAILED ({err})"
        print(f"cell {scheme} load={load:g} seed={seed}: {status}", flush=True)
        if err:
            failures.append((scheme, load, seed, err))
    if jobs > 1:
        pool.shutdown()
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "failures.csv", "w") as fh:
        fh.write("scheme,load,seed,error\n")
        for s, l, d, e in failures:
            fh.write(f"{s},{l!r},{d},\"{e.replace(chr(34), chr(39))}\"\n")
    n = merge_sweep(root, cells)
    print(f"merged {n} cells into {root / 'merged.csv'}")
    return EXIT_CELLS_FAILED if failures else EXIT_OK


def cmd_threshold(cfg: ExperimentConfig, args) -> int:
    th = cfg.raw["threshold"]
    dist = cfg.distribution()
    cap = cfg.raw["topology"]["link_gbps"] * 1e9
    t_cost = cfg.raw["hyline"]["t_cost_us"] * 1e-6
    h = float(cfg.raw["hyline"]["h_bytes"])
    xs = np.geomspace(th["min_bytes"], dist.sizes[-1], int(th["points"]))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for load in th["loads"]:
        inp = ThresholdInputs(dist, cap, float(load), t_cost)
        ew, frac, sat = wait_curve(inp, xs)
        for x, e, f_, s in zip(xs, ew, frac, sat):
            rows.append((float(load), float(x), float(e), float(f_), int(s)))
        if np.any(sat):
            print(f"load {load:g}: saturated for x >= {xs[np.argmax(sat)]:.0f} bytes (rows flagged)")
    with open(out / "threshold.csv", "w") as fh:
        fh.write("load,x_bytes,ew_s,load_fraction,saturated\n")
        for r in rows:
            fh.write(f"{r[0]!r},{r[1]!r},{r[2]!r},{r[3]!r},{r[4]}\n")
    band_load = float(th["band_load"])
    band = compute_band(ThresholdInputs(dist, cap, band_load, t_cost), chosen_h=h)
    verdict = "inside" if band.contains(h) else "OUTSIDE"
    print(
        f"band at load {band_load:g}: [{band.h_low:.0f}, {band.h_high:.0f}] bytes; "
        f"H = {h:.0f} is {verdict}"
    )
    print(f"wrote {out / 'threshold.csv'}")
    return EXIT_OK


def cmd_report(cfg: ExperimentConfig, args) -> int:
    root = Path(cfg.out)
    if (root / "cells").is_dir():
        schemes, loads, seeds = cfg.sweep_axes()
        cells = [(s, l, d) for s in schemes for l in loads for d in seeds]
        n = merge_sweep(root, cells)
        print(f"re-merged {n} cells into {root / 'merged.csv'}")
        return EXIT_OK
    path = root / "report.csv"
    if not path.exists():
        raise ConfigError(f"no report.csv or cells/ under {root}")
    rep = RunReport.from_csv(path, scheme=cfg.mode)
    summ = metrics.summarize(rep, cfg.topology(), float(cfg.raw["workload"]["load"]))
    metrics.write_summary(summ, root / "summary.csv")
    if summ.man_stats:
        metrics.write_man_stats(summ, root / "man_stats.csv")
    for b in summ.bins.values():
        print(f"{b.bin:>14}: mean {b.mean_nfct:.4f} p99 {b.p99_nfct:.4f} n={b.count} tput {b.app_tput:.4f}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "threshold": cmd_threshold, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyline", description="HyLine fabric simulator and analysis")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("-c", "--config", help="YAML config file")
        s.add_argument("--seed", type=int, help="workload and scheduler seed")
        s.add_argument("--out", help="output directory")
        s.add_argument("--jobs", type=int, default=0, help="parallel sweep cells (0 = auto)")
        s.add_argument("--load", type=float, help="offered load for run")
        s.add_argument("--mode", help="scheme for run")
        s.add_argument("--flows", type=int, help="number of flows")
        s.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override any config key, e.g. --set switch.pfc_enabled=false",
        )
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        overrides = [parse_override(s) for s in args.set]
        flat = {
            "workload.seed": args.seed,
            "out": args.out,
            "workload.load": args.load,
            "mode": args.mode,
            "workload.flows": args.flows,
        }
        for k, v in flat.items():
            if v is not None:
                overrides.append(parse_override(f"{k}={v}"))
        if args.seed is not None and args.command == "sweep":
            overrides.append({"sweep": {"seeds": [args.seed]}})
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
