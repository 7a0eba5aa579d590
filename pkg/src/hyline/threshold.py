"""Practical band for the 1st/2nd-class size threshold.

The lower edge comes from the mean time a flow of size x waits for its
first service in an M/G/1 queue under SRPT: below it, consulting the central
manager costs more than the flow would have waited anyway.  The upper edge
caps the share of load carried by 1st-class flows at 10%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .workload import KB, MB, SizeDistribution


class SaturationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ThresholdInputs:
    dist: SizeDistribution
    link_capacity: float = 1e9  # bits/s
    total_load: float = 0.6
    t_cost: float = 100e-6  # seconds

    def __post_init__(self):
        if not (0 <= self.total_load < 1):
            raise ValueError("total_load must be in [0, 1)")
        if self.link_capacity <= 0:
            raise ValueError("link_capacity must be positive")

    @property
    def arrival_rate(self) -> float:
        """Flows per second on the modelled link."""
        return self.total_load * self.link_capacity / (self.dist.mean_size * 8.0)

    def service_time(self, size):
        return np.asarray(size, dtype=float) * 8.0 / self.link_capacity


@dataclass(frozen=True)
class ThresholdBand:
    h_low: float
    h_high: float
    chosen_h: float

    @property
    def empty(self) -> bool:
        return self.h_low > self.h_high

    def contains(self, h: float) -> bool:
        return self.h_low <= h <= self.h_high


def loads_below(inputs: ThresholdInputs, x_size):
    """rho(x): load offered by flows no larger than x."""
    per_bit = 8.0 / inputs.link_capacity
    return inputs.arrival_rate * inputs.dist.first_moment_below(x_size) * per_bit


def expected_wait(inputs: ThresholdInputs, x_size: float) -> float:
    lam = inputs.arrival_rate
    if lam == 0.0:
        return 0.0
    d = inputs.dist
    per_bit = 8.0 / inputs.link_capacity
    x = float(x_size) * per_bit
    rho = lam * d.first_moment_below(x_size) * per_bit
    if rho >= 1.0:
        raise SaturationError(f"rho(x)={rho:.4f} >= 1 at x={x_size:g} bytes")
    m2 = d.second_moment_below(x_size) * per_bit * per_bit
    tail = 1.0 - d.cdf(x_size)
    return lam * (m2 + x * x * tail) / (2.0 * (1.0 - rho) ** 2)


def load_fraction_below(inputs: ThresholdInputs, x_size: float) -> float:
    d = inputs.dist
    if x_size <= 0:
        return 0.0
    return min(1.0, float(d.first_moment_below(x_size) / d.mean_size))


def _first_true(pred, n_hi: int) -> int:
    """Smallest n in [0, n_hi] with pred(n) true; pred monotone; n_hi+1 if none."""
    if not pred(n_hi):
        return n_hi + 1
    lo, hi = -1, n_hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def compute_band(
    inputs: ThresholdInputs,
    chosen_h: float = 1 * MB,
    resolution: float = 1 * KB,
    upper_share: float = 0.1,
) -> ThresholdBand:
    """Band edges on a ``resolution`` grid, both rounded into the band."""
    top = int(math.ceil(inputs.dist.sizes[-1] / resolution)) + 1

    if inputs.t_cost <= 0:
        h_low = 0.0
    else:
        n = _first_true(lambda i: expected_wait(inputs, i * resolution) >= inputs.t_cost, top)
        h_low = math.inf if n > top else n * resolution

    # largest grid point whose share of load is still within the cap
    n = _first_true(lambda i: load_fraction_below(inputs, i * resolution) > upper_share, top)
    h_high = (n - 1) * resolution if n >= 1 else 0.0
    if n > top:
        h_high = math.inf
    return ThresholdBand(h_low, h_high, float(chosen_h))


def wait_curve(inputs: ThresholdInputs, xs):
    """E[W(x)], load share and saturation flag for each size in ``xs``."""
    xs = np.asarray(xs, dtype=float)
    ew = np.empty_like(xs)
    frac = np.empty_like(xs)
    sat = np.zeros(len(xs), dtype=bool)
    for i, x in enumerate(xs):
        frac[i] = load_fraction_below(inputs, x)
        try:
            ew[i] = expected_wait(inputs, x)
        except SaturationError:
            ew[i] = math.nan
            sat[i] = True
    return ew, frac, sat
