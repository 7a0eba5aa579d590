"""Per-flow run records shared by the packet simulator and the fluid baselines."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

COLUMNS = (
    "flow_id",
    "class",
    "bytes",
    "arrival_s",
    "start_s",
    "finish_s",
    "path_len",
    "retx",
    "preemptions",
    "wait_s",
    "stopped_s",
)
_INT_COLS = {"flow_id", "class", "bytes", "path_len", "retx", "preemptions"}


@dataclass
class RunReport:
    flow_id: np.ndarray
    cls: np.ndarray
    size: np.ndarray
    arrival: np.ndarray
    start: np.ndarray
    finish: np.ndarray
    path_len: np.ndarray
    retx: np.ndarray
    preemptions: np.ndarray
    wait: np.ndarray
    stopped: np.ndarray
    scheme: str = ""
    stats: Dict[str, float] = field(default_factory=dict)

    def __len__(self):
        return len(self.flow_id)

    @property
    def fct(self) -> np.ndarray:
        return self.finish - self.arrival

    def _cols(self):
        return (
            self.flow_id,
            self.cls,
            self.size,
            self.arrival,
            self.start,
            self.finish,
            self.path_len,
            self.retx,
            self.preemptions,
            self.wait,
            self.stopped,
        )

    def to_csv(self, path) -> None:
        cols = []
        for name, col in zip(COLUMNS, self._cols()):
            if name in _INT_COLS:
                cols.append([str(int(v)) for v in col])
            else:
                cols.append([repr(float(v)) for v in col])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            w.writerows(zip(*cols))

    @classmethod
    def from_csv(cls, path, scheme: str = "") -> "RunReport":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != COLUMNS:
            raise ValueError(f"{path}: not a run report (bad header)")
        body = rows[1:]
        out = []
        for j, name in enumerate(COLUMNS):
            dtype = np.int64 if name in _INT_COLS else float
            out.append(np.array([r[j] for r in body], dtype=dtype))
        return cls(*out, scheme=scheme)

    def write_stats(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "value"])
            for k in sorted(self.stats):
                w.writerow([k, repr(self.stats[k])])


def read_stats(path) -> Dict[str, float]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return {k: float(v) for k, v in rows}
