"""Flow-size distributions and Poisson flow-arrival traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.optimize import bisect

from .topology import Topology

KB = 1_000
MB = 1_000_000


class WorkloadError(ValueError):
    pass


class SizeDistribution:
    """Piecewise-linear CDF over flow sizes in bytes.

    CDF is 0 below the first knot; a positive probability at the first knot
    is an atom at that size.
    """

    def __init__(self, sizes, probs, name: str = ""):
        sizes = np.asarray(sizes, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if sizes.ndim != 1 or sizes.shape != probs.shape or len(sizes) == 0:
            raise WorkloadError("sizes and probabilities must be equal-length 1-D")
        if sizes[0] <= 0 or np.any(np.diff(sizes) <= 0):
            raise WorkloadError("sizes must be positive and strictly increasing")
        if probs[0] < 0 or np.any(np.diff(probs) < 0):
            raise WorkloadError("cumulative probabilities must be nondecreasing")
        if not math.isclose(probs[-1], 1.0, abs_tol=1e-9):
            raise WorkloadError("last cumulative probability must be 1")
        probs[-1] = 1.0
        self.sizes = sizes
        self.probs = probs
        self.name = name
        dp = np.diff(probs)
        a, b = sizes[:-1], sizes[1:]
        # cumulative partial moments at each knot
        seg1 = dp * (a + b) / 2.0
        seg2 = dp * (a * a + a * b + b * b) / 3.0
        self._m1 = np.concatenate(([probs[0] * sizes[0]], probs[0] * sizes[0] + np.cumsum(seg1)))
        self._m2 = np.concatenate(([probs[0] * sizes[0] ** 2], probs[0] * sizes[0] ** 2 + np.cumsum(seg2)))
        with np.errstate(divide="ignore", invalid="ignore"):
            self._dens = np.where(b > a, dp / (b - a), 0.0)

    @classmethod
    def from_file(cls, path) -> "SizeDistribution":
        sizes, probs = [], []
        text = Path(path).read_text()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise WorkloadError(f"{path}:{lineno}: expected 'size_bytes cumulative_probability'")
            sizes.append(float(parts[0]))
            probs.append(float(parts[1]))
        return cls(sizes, probs, name=Path(path).stem)

    @classmethod
    def builtin(cls, name: str) -> "SizeDistribution":
        ref = resources.files("hyline") / "data" / f"{name}.cdf"
        with resources.as_file(ref) as p:
            return cls.from_file(p)

    @property
    def mean_size(self) -> float:
        return float(self._m1[-1])

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.sizes, x, side="right") - 1
        return x, i

    def cdf(self, x):
        x, i = self._locate(x)
        ic = np.clip(i, 0, len(self.sizes) - 2) if len(self.sizes) > 1 else np.zeros_like(i)
        if len(self.sizes) == 1:
            out = np.where(i >= 0, 1.0, 0.0)
        else:
            inner = self.probs[ic] + self._dens[ic] * (x - self.sizes[ic])
            out = np.where(i < 0, 0.0, np.where(i >= len(self.sizes) - 1, 1.0, inner))
        return out if out.ndim else float(out)

    def _partial(self, x, cum, power):
        x, i = self._locate(x)
        n = len(self.sizes)
        if n == 1:
            out = np.where(i >= 0, cum[0], 0.0)
        else:
            ic = np.clip(i, 0, n - 2)
            a = self.sizes[ic]
            extra = self._dens[ic] * (x ** (power + 1) - a ** (power + 1)) / (power + 1)
            inner = cum[ic] + extra
            out = np.where(i < 0, 0.0, np.where(i >= n - 1, cum[-1], inner))
        return out if out.ndim else float(out)

    def first_moment_below(self, x):
        """Integral of s dF(s) over (0, x]."""
        return self._partial(x, self._m1, 1)

    def second_moment_below(self, x):
        """Integral of s^2 dF(s) over (0, x]."""
        return self._partial(x, self._m2, 2)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if len(self.sizes) == 1:
            return np.full(u.shape, self.sizes[0])
        j = np.searchsorted(self.probs, u, side="left")
        j = np.clip(j, 1, len(self.sizes) - 1)
        p0, p1 = self.probs[j - 1], self.probs[j]
        s0, s1 = self.sizes[j - 1], self.sizes[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(p1 > p0, (u - p0) / (p1 - p0), 0.0)
        out = s0 + np.clip(frac, 0.0, 1.0) * (s1 - s0)
        return np.where(u <= self.probs[0], self.sizes[0], out)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.ppf(rng.random(n))

    def refined(self, factor: int) -> "SizeDistribution":
        """Same CDF with ``factor`` times as many knots (points on each segment)."""
        sizes, probs = [self.sizes[0]], [self.probs[0]]
        for i in range(len(self.sizes) - 1):
            for j in range(1, factor + 1):
                w = j / factor
                sizes.append(self.sizes[i] + w * (self.sizes[i + 1] - self.sizes[i]))
                probs.append(self.probs[i] + w * (self.probs[i + 1] - self.probs[i]))
        return SizeDistribution(sizes, probs, name=self.name)


@dataclass(frozen=True)
class BoundedPareto:
    alpha: float
    low: float = 1 * KB
    high: float = 100 * MB

    def __post_init__(self):
        if not (0 < self.low < self.high):
            raise WorkloadError("bounded Pareto needs 0 < low < high")
        if self.alpha < 0:
            raise WorkloadError("alpha must be >= 0")

    @property
    def name(self):
        return f"pareto(alpha={self.alpha:.6g})"

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.low, self.high)
        a = self.alpha
        span = math.log(self.high / self.low)
        if a == 0.0:  # log-uniform limit
            out = np.log(x / self.low) / span
        else:
            out = np.expm1(-a * np.log(x / self.low)) / math.expm1(-a * span)
        return out if np.ndim(out) else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        a = self.alpha
        span = math.log(self.high / self.low)
        if a == 0.0:
            return self.low * np.exp(u * span)
        return self.low * np.exp(-np.log1p(u * math.expm1(-a * span)) / a)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.ppf(rng.random(n))

    @property
    def mean_size(self) -> float:
        a, lo, hi = self.alpha, self.low, self.high
        if a == 0.0:
            return (hi - lo) / math.log(hi / lo)
        norm = -math.expm1(-a * math.log(hi / lo))
        if a == 1.0:
            return lo * math.log(hi / lo) / norm
        return a * lo ** a * (hi ** (1 - a) - lo ** (1 - a)) / ((1 - a) * norm)

    def to_distribution(self, knots: int = 2000) -> SizeDistribution:
        xs = np.geomspace(self.low, self.high, knots)
        ps = self.cdf(xs)
        ps[0] = 0.0
        ps[-1] = 1.0
        return SizeDistribution(xs, ps, name=self.name)


def fit_bounded_pareto(
    frac_below: float, low: float = 1 * KB, high: float = 100 * MB, at: float = 100 * KB
) -> float:
    """Shape alpha such that P(size <= at) == frac_below."""
    if not (low < at < high):
        raise WorkloadError("need low < at < high")
    floor = BoundedPareto(0.0, low, high).cdf(at)
    if frac_below >= 1.0 or frac_below < floor - 1e-12:
        raise WorkloadError(
            f"fraction {frac_below} unreachable for bounds ({low:g}, {high:g}); "
            f"feasible range is [{floor:.6f}, 1)"
        )
    if frac_below <= floor + 1e-12:
        return 0.0

    def g(a):
        return BoundedPareto(a, low, high).cdf(at) - frac_below

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e4:
            raise WorkloadError("could not bracket alpha")
    return bisect(g, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


Distribution = Union[SizeDistribution, BoundedPareto]


@dataclass
class WorkloadSpec:
    dist: Distribution
    target_load: float
    flow_count: Optional[int] = None
    duration: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        if not (0 < self.target_load < 1):
            raise WorkloadError("target_load must be in (0, 1)")
        if (self.flow_count is None) == (self.duration is None):
            raise WorkloadError("give exactly one of flow_count or duration")


@dataclass
class FlowTrace:
    arrival: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    size: np.ndarray

    def __len__(self):
        return len(self.arrival)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["arrival_s", "src", "dst", "bytes"])
            for row in zip(self.arrival.tolist(), self.src.tolist(), self.dst.tolist(), self.size.tolist()):
                w.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "FlowTrace":
        cols = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
        return cls(
            cols[:, 0].astype(float),
            cols[:, 1].astype(np.int64),
            cols[:, 2].astype(np.int64),
            cols[:, 3].astype(np.int64),
        )

    def slice(self, n: int) -> "FlowTrace":
        return FlowTrace(self.arrival[:n], self.src[:n], self.dst[:n], self.size[:n])


def per_host_rate(spec: WorkloadSpec, line_rate: float) -> float:
    return spec.target_load * line_rate / (spec.dist.mean_size * 8.0)


def generate_trace(spec: WorkloadSpec, topo: Topology) -> FlowTrace:
    hosts = np.asarray(topo.hosts, dtype=np.int64)
    line_rate = topo.links[topo.link_between(topo.hosts[0], topo.edge_of(topo.hosts[0]))].capacity
    lam = per_host_rate(spec, line_rate) * len(hosts)
    rng = np.random.default_rng(spec.rng_seed)
    if spec.flow_count is not None:
        n = int(spec.flow_count)
        arrival = np.cumsum(rng.exponential(1.0 / lam, n))
    else:
        chunks, t = [], 0.0
        while t < spec.duration:
            gaps = rng.exponential(1.0 / lam, max(16, int(lam * spec.duration * 0.2)))
            arr = t + np.cumsum(gaps)
            chunks.append(arr)
            t = arr[-1]
        arrival = np.concatenate(chunks)
        arrival = arrival[arrival < spec.duration]
        n = len(arrival)
    si = rng.integers(0, len(hosts), n)
    off = rng.integers(1, len(hosts), n)
    di = (si + off) % len(hosts)
    sizes = np.maximum(1, np.ceil(spec.dist.sample(rng, n))).astype(np.int64)
    return FlowTrace(arrival, hosts[si], hosts[di], sizes)
