"""Normalized FCT statistics, application throughput and MAN telemetry."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .report import RunReport
from .topology import PACKET_BYTES, Topology, enumerate_paths
from .workload import KB, MB

BIN_EDGES = (0, 100 * KB, 1 * MB, 10 * MB, math.inf)
BIN_LABELS = ("(0,100KB]", "(100KB,1MB]", "(1MB,10MB]", "(10MB,inf)")
ALL = "all"
CLASS_LABELS = {1: "class1", 2: "class2"}

SUMMARY_COLUMNS = ("scheme", "load", "bin", "mean_nfct", "p99_nfct", "count", "app_tput")
MAN_COLUMNS = (
    "scheme",
    "load",
    "bin",
    "requests_per_s",
    "mean_wait_s",
    "mean_stopped_s",
    "mean_preemptions",
    "count",
)


def size_bin(size) -> np.ndarray:
    """Index into BIN_LABELS for each size (bins are right-closed)."""
    return np.searchsorted(np.asarray(BIN_EDGES[1:-1], dtype=float), np.asarray(size, dtype=float), side="left")


def ideal_fct(topo: Topology, src: int, dst: int, size: float) -> float:
    """Empty-fabric FCT: propagation, serialization at line rate and
    store-and-forward of the last packet at every later hop."""
    path = enumerate_paths(topo, src, dst)[0]
    links = [topo.links[l] for l in path.links]
    last = min(size, PACKET_BYTES)
    prop = sum(l.propagation_delay for l in links)
    return prop + size * 8.0 / min(l.capacity for l in links) + sum(
        last * 8.0 / l.capacity for l in links[1:]
    )


def ideal_fct_by_len(path_len, size, capacity: float, delay: float) -> np.ndarray:
    """Vectorized ideal FCT for uniform links, from path length alone."""
    path_len = np.asarray(path_len, dtype=float)
    size = np.asarray(size, dtype=float)
    last = np.minimum(size, PACKET_BYTES)
    return path_len * delay + size * 8.0 / capacity + (path_len - 1) * last * 8.0 / capacity


def _uniform_link(topo: Topology):
    caps = {l.capacity for l in topo.links}
    delays = {l.propagation_delay for l in topo.links}
    if len(caps) != 1 or len(delays) != 1:
        raise ValueError("summaries need uniform link capacity and delay")
    return caps.pop(), delays.pop()


def nearest_rank(values, q: float) -> float:
    """q-quantile by nearest rank (no interpolation)."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        raise ValueError("empty sample")
    k = max(1, int(math.ceil(q * len(v))))
    return float(v[k - 1])


@dataclass
class BinStats:
    bin: str
    mean_nfct: float
    p99_nfct: float
    count: int
    app_tput: float


@dataclass
class MetricsSummary:
    scheme: str
    load: float
    bins: Dict[str, BinStats] = field(default_factory=dict)
    man_stats: List[Dict] = field(default_factory=list)

    def rows(self) -> List[Dict]:
        return [
            {
                "scheme": self.scheme,
                "load": self.load,
                "bin": b.bin,
                "mean_nfct": b.mean_nfct,
                "p99_nfct": b.p99_nfct,
                "count": b.count,
                "app_tput": b.app_tput,
            }
            for b in self.bins.values()
        ]


def normalized_fct(report: RunReport, topo: Topology) -> np.ndarray:
    cap, delay = _uniform_link(topo)
    ideal = ideal_fct_by_len(report.path_len, report.size, cap, delay)
    return report.fct / ideal


def measured_mask(report: RunReport, warmup_frac: float = 0.1) -> np.ndarray:
    """Flows counted in aggregates: all but the first ``warmup_frac`` by arrival."""
    n = len(report)
    order = np.argsort(report.arrival, kind="stable")
    mask = np.ones(n, dtype=bool)
    mask[order[: int(math.floor(warmup_frac * n))]] = False
    return mask


def _stats(label, nf, ok) -> Optional[BinStats]:
    if len(nf) == 0:
        return None
    return BinStats(label, float(nf.mean()), nearest_rank(nf, 0.99), int(len(nf)), float(ok.mean()))


def summarize(
    report: RunReport,
    topo: Topology,
    load: float = math.nan,
    warmup_frac: float = 0.1,
    deadline_factor: float = 4.0,
) -> MetricsSummary:
    """Per-size-bin, per-class and overall statistics; empty bins are omitted."""
    if np.any(report.finish < 0):
        raise ValueError(f"{int(np.sum(report.finish < 0))} flows did not finish")
    nf = normalized_fct(report, topo)
    ok = nf <= deadline_factor
    m = measured_mask(report, warmup_frac)
    out = MetricsSummary(report.scheme, load)
    bins = size_bin(report.size)
    for i, label in enumerate(BIN_LABELS):
        sel = m & (bins == i)
        s = _stats(label, nf[sel], ok[sel])
        if s:
            out.bins[label] = s
    for c, label in CLASS_LABELS.items():
        sel = m & (report.cls == c)
        s = _stats(label, nf[sel], ok[sel])
        if s:
            out.bins[label] = s
    s = _stats(ALL, nf[m], ok[m])
    if s:
        out.bins[ALL] = s
    if np.any(report.cls == 2) and report.scheme.startswith("hyline"):
        out.man_stats = man_telemetry(report, load, warmup_frac)
    return out


def man_telemetry(report: RunReport, load: float = math.nan, warmup_frac: float = 0.1) -> List[Dict]:
    """Manager-side statistics for 2nd-class flows, per size bin and overall."""
    m = measured_mask(report, warmup_frac) & (report.cls == 2)
    arr = report.arrival[measured_mask(report, warmup_frac)]
    span = float(arr.max() - arr.min()) if len(arr) > 1 else math.nan
    bins = size_bin(report.size)
    rows = []
    groups = [(label, m & (bins == i)) for i, label in enumerate(BIN_LABELS)] + [(ALL, m)]
    for label, sel in groups:
        k = int(sel.sum())
        if k == 0:
            continue
        rows.append(
            {
                "scheme": report.scheme,
                "load": load,
                "bin": label,
                "requests_per_s": k / span if span and span > 0 else math.nan,
                "mean_wait_s": float(report.wait[sel].mean()),
                "mean_stopped_s": float(report.stopped[sel].mean()),
                "mean_preemptions": float(report.preemptions[sel].mean()),
                "count": k,
            }
        )
    return rows


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows: List[Dict], path, columns=SUMMARY_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_rows(path) -> List[Dict]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        out = []
        for r in rd:
            row = {}
            for k, v in r.items():
                if k in ("scheme", "bin"):
                    row[k] = v
                elif k in ("count", "seed"):
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            out.append(row)
    return out


def write_summary(summary: MetricsSummary, path) -> None:
    write_rows(summary.rows(), path, SUMMARY_COLUMNS)


def write_man_stats(summary: MetricsSummary, path) -> None:
    write_rows(summary.man_stats, path, MAN_COLUMNS)
