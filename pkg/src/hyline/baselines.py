"""Idealized fluid comparators: per-link max-min fair sharing and SRPT.

Flows keep their ECMP path for life and have no packets, windows or RTTs;
rates are recomputed at every arrival and completion.  Both are optimistic
stand-ins ("idealized baselines") for a TCP-like fair share and a
pFabric-like SRPT fabric.
"""

from __future__ import annotations

import numpy as np

from ._jit import njit
from .report import RunReport
from .topology import PACKET_BYTES, Topology, ecmp_select, enumerate_paths
from .workload import FlowTrace

MAXMIN, SRPT = 0, 1
POLICIES = {"maxmin": MAXMIN, "srpt": SRPT}


@njit
def maxmin_rates(act, na, pl, pn, cap, rate, rescap, cnt, frozen):
    """Water-filling over the ``na`` flows listed in ``act``.

    ``rescap``, ``cnt`` and ``frozen`` are scratch arrays sized to links and
    flows; ``rate`` receives the allocation.
    """
    for j in range(na):
        f = act[j]
        rate[f] = 0.0
        frozen[f] = 0
        for h in range(pn[f]):
            l = pl[f, h]
            rescap[l] = cap[l]
            cnt[l] = 0
    for j in range(na):
        f = act[j]
        for h in range(pn[f]):
            cnt[pl[f, h]] += 1
    left = na
    while left > 0:
        best = -1
        share = np.inf
        for j in range(na):
            f = act[j]
            if frozen[f]:
                continue
            for h in range(pn[f]):
                l = pl[f, h]
                s = rescap[l] / cnt[l]
                if s < share or (s == share and l < best):
                    share = s
                    best = l
        if share < 0.0:
            share = 0.0
        for j in range(na):
            f = act[j]
            if frozen[f]:
                continue
            on = False
            for h in range(pn[f]):
                if pl[f, h] == best:
                    on = True
                    break
            if not on:
                continue
            frozen[f] = 1
            rate[f] = share
            left -= 1
            for h in range(pn[f]):
                l = pl[f, h]
                rescap[l] -= share
                cnt[l] -= 1


@njit
def srpt_rates(act, na, pl, pn, cap, rem, rate, top):
    """Per-link SRPT: each link belongs to its smallest-remaining flow (ties
    by id); a flow runs at its path's capacity only if it owns every link."""
    for j in range(na):
        f = act[j]
        for h in range(pn[f]):
            top[pl[f, h]] = -1
    for j in range(na):
        f = act[j]
        for h in range(pn[f]):
            l = pl[f, h]
            g = top[l]
            if g < 0 or rem[f] < rem[g] or (rem[f] == rem[g] and f < g):
                top[l] = f
    for j in range(na):
        f = act[j]
        r = np.inf
        for h in range(pn[f]):
            l = pl[f, h]
            if top[l] != f:
                r = 0.0
                break
            r = min(r, cap[l])
        rate[f] = r


@njit
def fluid_kernel(arrival, size_bits, pl, pn, cap, policy):
    n = len(arrival)
    nl = len(cap)
    finish = np.full(n, -1.0)
    rem = size_bits.copy()
    rate = np.zeros(n)
    frozen = np.zeros(n, np.int64)
    act = np.zeros(n, np.int64)
    top = np.zeros(nl, np.int64)
    rescap = np.zeros(nl)
    cnt = np.zeros(nl, np.int64)
    na = 0
    k = 0
    t = 0.0
    while k < n or na > 0:
        if na == 0:
            t = arrival[k]
        while k < n and arrival[k] <= t:
            act[na] = k
            na += 1
            k += 1
        if policy == MAXMIN:
            maxmin_rates(act, na, pl, pn, cap, rate, rescap, cnt, frozen)
        else:
            srpt_rates(act, na, pl, pn, cap, rem, rate, top)
        dt = np.inf
        for j in range(na):
            f = act[j]
            if rate[f] > 0.0:
                d = rem[f] / rate[f]
                if d < dt:
                    dt = d
        ta = arrival[k] if k < n else np.inf
        if ta - t < dt:
            dt = ta - t
            done_now = False
        else:
            done_now = True
        t_new = t + dt
        j = 0
        while j < na:
            f = act[j]
            rf = rate[f]
            if rf > 0.0:
                rem[f] -= rf * dt
                if (done_now and rem[f] / rf <= 1e-12 * max(t_new, 1e-9)) or rem[f] <= 1e-6:
                    rem[f] = 0.0
                    finish[f] = t_new
                    na -= 1
                    act[j] = act[na]
                    continue
            j += 1
        t = t_new
    return finish


def fluid_run(
    trace: FlowTrace,
    topo: Topology,
    policy: str = "maxmin",
    include_path_latency: bool = True,
) -> RunReport:
    """Fluid simulation of ``trace`` on ECMP paths.

    With ``include_path_latency`` each FCT also carries the empty-fabric
    path latency (propagation plus store-and-forward of the last packet), so
    fluid and packet results normalize against the same ideal.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    n = len(trace)
    pl = np.full((max(n, 1), 6), -1, dtype=np.int64)
    pn = np.zeros(max(n, 1), dtype=np.int64)
    offset = np.zeros(n)
    cache = {}
    for f, (s, d) in enumerate(zip(trace.src.tolist(), trace.dst.tolist())):
        key = (s, d)
        if key not in cache:
            cache[key] = enumerate_paths(topo, s, d)
        path = ecmp_select(topo, (s, d, f, 0), cache[key])
        pl[f, : len(path)] = path.links
        pn[f] = len(path)
        last = min(int(trace.size[f]), PACKET_BYTES)
        first = topo.links[path.links[0]]
        offset[f] = sum(topo.links[l].propagation_delay for l in path.links) + (
            len(path) - 1
        ) * last * 8.0 / first.capacity
    cap = np.array([l.capacity for l in topo.links], dtype=float)
    size = trace.size.astype(np.int64)
    arrival = np.asarray(trace.arrival, dtype=float)
    if n:
        finish = fluid_kernel(arrival, size * 8.0, pl, pn, cap, POLICIES[policy])
    else:
        finish = np.zeros(0)
    if include_path_latency:
        finish = finish + offset
    zeros_i = np.zeros(n, dtype=np.int64)
    return RunReport(
        flow_id=np.arange(n, dtype=np.int64),
        cls=np.ones(n, dtype=np.int64),
        size=size,
        arrival=arrival.copy(),
        start=arrival.copy(),
        finish=finish,
        path_len=pn[:n].copy(),
        retx=zeros_i,
        preemptions=zeros_i.copy(),
        wait=np.zeros(n),
        stopped=np.zeros(n),
        scheme="baseline_fair" if policy == "maxmin" else "baseline_srpt",
        stats={"flows": n},
    )
