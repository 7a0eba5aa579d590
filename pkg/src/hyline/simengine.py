"""Packet-level simulation of a fat-tree fabric under HyLine scheduling.

Hosts classify each flow against the threshold H.  1st-class flows start at
once on an ECMP path and use the high-priority queue.  2nd-class flows send
RTS to the manager, transmit on the path carried by CTS, halt on STS and send
FIN when their last packet goes out.  Control messages take T_cost/2 each
way.  Switch ports hold two strict-priority FIFOs in a shared buffer and,
optionally, pause upstream 2nd-class traffic with PFC.

The event loop itself is in :mod:`hyline._engine`; this module builds its
arrays, runs the manager between kernel calls and collects the report.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from . import _engine as E
from .man import CTS, SECOND, Flow, ManState
from .report import RunReport
from .topology import (
    ACK_BYTES,
    AGG,
    CORE,
    EDGE,
    HOST,
    PACKET_BYTES,
    Topology,
    ecmp_select,
    enumerate_paths,
)
from .workload import MB, FlowTrace

log = logging.getLogger(__name__)

MODES = ("hyline", "baseline_fair", "baseline_srpt")
_TIER = {HOST: 0, EDGE: 1, AGG: 2, CORE: 3}


class DeadlockError(RuntimeError):
    """Unfinished flows remain but nothing can make progress."""


@dataclass
class SimParams:
    h_bytes: float = 1 * MB
    t_cost: float = 100e-6
    buffer_pkts: int = 225
    pause_pkts: int = 215
    resume_pkts: int = 205
    pfc_enabled: bool = True
    init_window: int = 25
    minrto_class1: float = 4e-3
    minrto_class2: float = 1.0
    max_window: int = 160
    max_rto: float = 64.0
    stall_time: float = 30.0  # simulated seconds without delivery progress
    max_events: int = 0  # 0 = unlimited
    check_man: bool = True
    drop_once: Dict[int, int] = field(default_factory=dict)  # flow -> seq lost once at the first switch
    seed: int = 0

    def validate(self):
        if not (0 < self.resume_pkts < self.pause_pkts <= self.buffer_pkts):
            raise ValueError("need 0 < resume_pkts < pause_pkts <= buffer_pkts")
        if self.init_window < 1 or self.max_window < self.init_window:
            raise ValueError("need 1 <= init_window <= max_window")
        if self.t_cost < 0 or self.minrto_class1 <= 0 or self.minrto_class2 <= 0:
            raise ValueError("t_cost must be >= 0 and minRTOs > 0")
        if self.h_bytes < 0:
            raise ValueError("h_bytes must be >= 0")


def classify(size, h_bytes):
    """2 for flows strictly larger than the threshold, 1 otherwise."""
    return np.where(np.asarray(size) > h_bytes, 2, 1)


def _feeds(topo: Topology) -> Tuple[np.ndarray, np.ndarray]:
    """Inbound links whose traffic may leave through each egress link.

    Up-down routing: a packet coming up may turn to any other port, one
    coming down keeps going down.
    """
    tier = [_TIER[n.kind] for n in topo.nodes]
    inbound: Dict[int, List] = {}
    for l in topo.links:
        inbound.setdefault(l.dst_node, []).append(l)
    starts = np.zeros(len(topo.links) + 1, dtype=np.int64)
    flat: List[int] = []
    for e in topo.links:
        n = e.src_node
        if tier[n] > 0:
            for i in inbound.get(n, ()):
                up = tier[i.src_node] < tier[n]
                if up and i.src_node != e.dst_node:
                    flat.append(i.id)
                elif not up and tier[e.dst_node] < tier[n]:
                    flat.append(i.id)
        starts[e.id + 1] = len(flat)
    return starts, np.asarray(flat, dtype=np.int64)


class _Setup:
    """Static tables plus the initial kernel arrays for one run."""

    def __init__(self, topo: Topology, trace: FlowTrace, p: SimParams):
        self.topo = topo
        n = len(trace)
        hosts = {h: i for i, h in enumerate(topo.hosts)}
        nh = len(hosts)

        # paths for every host pair that appears in the trace
        self.pair_paths: Dict[Tuple[int, int], List] = {}
        self.pair_base: Dict[Tuple[int, int], int] = {}
        rows = []
        for s, d in zip(trace.src.tolist(), trace.dst.tolist()):
            key = (s, d)
            if key not in self.pair_paths:
                ps = enumerate_paths(topo, s, d)
                self.pair_paths[key] = ps
                self.pair_base[key] = len(rows)
                rows.extend(ps)
        np_ = max(1, len(rows))
        pl = np.full((np_, 6), -1, dtype=np.int64)
        pn = np.zeros(np_, dtype=np.int64)
        pack = np.zeros(np_)
        for i, path in enumerate(rows):
            pl[i, : len(path)] = path.links
            pn[i] = len(path)
            pack[i] = sum(
                topo.links[l].propagation_delay + ACK_BYTES * 8.0 / topo.links[l].capacity
                for l in path.links
            )

        nl = len(topo.links)
        li = np.full((nl, E.N_LI), 0, dtype=np.int64)
        lf = np.zeros((nl, E.N_LF))
        starts, feed = _feeds(topo)
        for l in topo.links:
            li[l.id, E.LI_HOST] = hosts.get(l.src_node, -1)
            lf[l.id, E.LF_CAP] = l.capacity
            lf[l.id, E.LF_DELAY] = l.propagation_delay
        li[:, E.LI_CUR] = -1
        for c in (E.LI_Q1H, E.LI_Q1T, E.LI_Q2H, E.LI_Q2T, E.LI_CLAIM):
            li[:, c] = -1
        li[:, E.LI_FEED0] = starts[:-1]
        li[:, E.LI_FEED1] = starts[1:]

        hs = np.full((nh, E.N_HS), -1, dtype=np.int64)
        for h, i in hosts.items():
            hs[i, E.HS_UPLINK] = topo.link_between(h, topo.edge_of(h))
        self.line_rate = min(l.capacity for l in topo.links)

        size = trace.size.astype(np.int64)
        if np.any(size <= 0):
            raise ValueError("flow sizes must be positive")
        if np.any(np.diff(trace.arrival) < 0):
            raise ValueError("trace arrivals must be sorted")
        npkt = (size + PACKET_BYTES - 1) // PACKET_BYTES
        cls = classify(size, p.h_bytes)
        fi = np.zeros((n, E.N_FI), dtype=np.int64)
        ff = np.zeros((n, E.N_FF))
        fi[:, E.FI_SH] = [hosts[s] for s in trace.src.tolist()]
        fi[:, E.FI_CLS] = cls
        fi[:, E.FI_NPKT] = npkt
        fi[:, E.FI_LASTB] = size - (npkt - 1) * PACKET_BYTES
        fi[:, E.FI_SIZE] = size
        fi[:, E.FI_RETX] = -1
        fi[:, E.FI_LSEQ] = -1
        fi[:, E.FI_PATH] = -1
        fi[:, E.FI_NEXT] = -1
        fi[:, E.FI_PREV] = -1
        fi[:, E.FI_DROPSEQ] = -1
        for f, seq in p.drop_once.items():
            fi[f, E.FI_DROPSEQ] = seq
        fi[:, E.FI_BOFF] = np.concatenate(([0], np.cumsum(npkt)[:-1]))
        for f, (s, d) in enumerate(zip(trace.src.tolist(), trace.dst.tolist())):
            base = self.pair_base[(s, d)]
            fi[f, E.FI_PBASE] = base
            ps = self.pair_paths[(s, d)]
            if cls[f] == 1:
                j = ps.index(ecmp_select(topo, (s, d, f, 0), ps))
                fi[f, E.FI_PATH] = base + j
                fi[f, E.FI_PLEN] = len(ps[j])
            else:
                fi[f, E.FI_PLEN] = len(ps[0])
        ff[:, E.FF_ARR] = trace.arrival
        ff[:, E.FF_START] = -1.0
        ff[:, E.FF_FINISH] = -1.0
        ff[:, E.FF_CWND] = p.init_window
        ff[:, E.FF_SSTH] = 1e18
        ff[:, E.FF_SRTT] = -1.0
        minrto = np.where(cls == 1, p.minrto_class1, p.minrto_class2)
        ff[:, E.FF_MINRTO] = minrto
        ff[:, E.FF_RTO] = minrto
        ff[:, E.FF_DEADLINE] = -1.0

        pool = 1 << 14
        pi = np.full((pool, E.N_PI), -1, dtype=np.int64)
        pi[:, E.PI_NEXT] = np.arange(1, pool + 1)
        pi[-1, E.PI_NEXT] = -1
        hcap = 1 << 14
        g = np.zeros(E.N_G, dtype=np.int64)
        g[E.G_FREE] = 0
        g[E.G_NFREE] = pool
        par = np.zeros(E.N_PAR)
        par[E.PAR_BUF] = p.buffer_pkts
        par[E.PAR_PAUSE] = p.pause_pkts
        par[E.PAR_RESUME] = p.resume_pkts
        par[E.PAR_PFC] = 1.0 if p.pfc_enabled else 0.0
        par[E.PAR_INITW] = p.init_window
        par[E.PAR_MAXW] = p.max_window
        par[E.PAR_TCOST] = p.t_cost
        par[E.PAR_MAXRTO] = p.max_rto
        par[E.PAR_STALL] = p.stall_time
        par[E.PAR_MAXEV] = p.max_events
        par[E.PAR_PKT] = PACKET_BYTES
        self.arrays = E.Arrays(
            fi=fi,
            ff=ff,
            li=li,
            lf=lf,
            pi=pi,
            pf=np.zeros(pool),
            hi=np.zeros((hcap, 5), dtype=np.int64),
            hf=np.zeros((hcap, 2)),
            hs=hs,
            g=g,
            gf=np.zeros(E.N_GF),
            par=par,
            pl=pl,
            pn=pn,
            pack=pack,
            rb=np.zeros(int(npkt.sum()), dtype=np.uint8),
            feed=feed,
        )


def _diagnose(a: E.Arrays, limit: int = 10) -> str:
    fi = a.fi
    open_ = np.flatnonzero(fi[:, E.FI_RCVDONE] == 0)
    names = {
        E.S_IDLE: "idle",
        E.S_ACTIVE: "active",
        E.S_WAITING: "waiting",
        E.S_STOPPED: "stopped",
        E.S_DRAINING: "draining",
        E.S_SENT: "sent",
    }
    parts = [
        f"flow {f} class {fi[f, E.FI_CLS]} {names.get(int(fi[f, E.FI_STATE]), '?')} "
        f"acked {fi[f, E.FI_UNA]}/{fi[f, E.FI_NPKT]}"
        for f in open_[:limit]
    ]
    paused = int(np.count_nonzero(a.li[:, E.LI_PAUSE] > 0))
    return (
        f"t={a.gf[E.GF_NOW]:.6f}s: {len(open_)} unfinished flows, "
        f"{paused} paused links, {a.g[E.G_HN]} pending events; " + "; ".join(parts)
    )


def simulate(topo: Topology, trace: FlowTrace, params: SimParams | None = None) -> RunReport:
    """HyLine packet-level run over ``trace``."""
    p = params or SimParams()
    p.validate()
    setup = _Setup(topo, trace, p)
    a = setup.arrays
    man = ManState.for_topology(topo, seed=p.seed)
    man_flows: Dict[int, Flow] = {}
    half = 0.5 * p.t_cost
    man_problems: List[str] = []
    man_calls = 0

    if len(trace) == 0:
        return _collect(setup, a, man, man_problems, man_calls, p)

    while True:
        rc = E.run_kernel(a)
        if rc == E.RC_DONE:
            break
        if rc == E.RC_GROW:
            a = E.grow(
                a,
                heap=a.g[E.G_HN] + E.MARGIN >= a.hi.shape[0],
                pool=a.g[E.G_NFREE] < E.MARGIN,
            )
            continue
        if rc == E.RC_MAN:
            f = int(a.g[E.G_MANFLOW])
            now = float(a.gf[E.GF_NOW])
            key = (int(trace.src[f]), int(trace.dst[f]))
            if a.g[E.G_MANKIND] == 0:
                fl = Flow(
                    f, key[0], key[1], float(trace.size[f]), SECOND,
                    setup.line_rate, float(trace.arrival[f]),
                )
                man_flows[f] = fl
                msgs = man.new_request(fl, now)
            else:
                msgs = man.remove_request(man_flows.pop(f), now)
            man_calls += 1
            for m in msgs:
                if m.kind == CTS:
                    ps = setup.pair_paths[(man.flows[m.flow_id].src, man.flows[m.flow_id].dst)]
                    idx = ps.index(m.path)
                else:
                    idx = -1
                E.push(a, now + half, E.EV_HOST, m.flow_id, idx, 0, 0.0)
            if p.check_man:
                problems = man.check_invariants()
                if problems:
                    man_problems.extend(f"t={now:.6f}: {x}" for x in problems)
            continue
        if rc == E.RC_LIMIT:
            raise DeadlockError(f"event limit reached; {_diagnose(a)}")
        raise DeadlockError(_diagnose(a))

    return _collect(setup, a, man, man_problems, man_calls, p)


def _collect(setup, a, man, man_problems, man_calls, p) -> RunReport:
    fi, ff = a.fi, a.ff
    n = fi.shape[0]
    g = a.g
    stats = {
        "events": int(g[E.G_EVENTS]),
        "packets": int(g[E.G_PKTS]),
        "drops_class1": int(g[E.G_DROP1]),
        "drops_class2": int(g[E.G_DROP2]),
        "drops_injected": int(g[E.G_INJDROP]),
        "pfc_pauses": int(g[E.G_PAUSES]),
        "timeouts": int(g[E.G_TIMEOUTS]),
        "retransmissions": int(g[E.G_RETX]),
        "duplicate_deliveries": int(g[E.G_DUPDELIV]),
        "strict_priority_violations": int(g[E.G_SPVIOL]),
        "exclusivity_violations": int(g[E.G_EXVIOL]),
        "class2_reorder_violations": int(g[E.G_REORDER]),
        "class2_cross_epoch_reorders": int(g[E.G_XEPOCH]),
        "conservation_violations": int(g[E.G_CONSVIOL]),
        "max_port_occupancy": int(a.li[:, E.LI_MAXOCC].max()) if len(a.li) else 0,
        "sim_time_s": float(a.gf[E.GF_NOW]),
        "man_requests": man.requests,
        "man_calls": man_calls,
        "man_find_path_calls": man.find_path_calls,
        "man_evaluations": man.evaluations,
        "man_max_find_path_evaluations": man.max_find_path_evaluations,
        "man_work_bound_violations": man.work_bound_violations,
        "man_preemption_violations": man.preemption_violations,
        "man_preemptions": man.preemptions,
        "man_invariant_violations": len(man_problems),
        "class2_flows": int(np.count_nonzero(fi[:, E.FI_CLS] == 2)),
    }
    if man_problems:
        log.warning("manager invariant violations: %s", man_problems[:5])
    return RunReport(
        flow_id=np.arange(n, dtype=np.int64),
        cls=fi[:, E.FI_CLS].copy(),
        size=fi[:, E.FI_SIZE].copy(),
        arrival=ff[:, E.FF_ARR].copy(),
        start=ff[:, E.FF_START].copy(),
        finish=ff[:, E.FF_FINISH].copy(),
        path_len=fi[:, E.FI_PLEN].copy(),
        retx=fi[:, E.FI_NRETX].copy(),
        preemptions=fi[:, E.FI_NPREEMPT].copy(),
        wait=ff[:, E.FF_WAIT].copy(),
        stopped=ff[:, E.FF_STOPPED].copy(),
        scheme="hyline" if p.pfc_enabled else "hyline_nopfc",
        stats=stats,
    )


def run(topo: Topology, trace: FlowTrace, scheduler_mode: str = "hyline", params: SimParams | None = None) -> RunReport:
    """One simulation of ``trace`` under the given scheduler."""
    params = params or SimParams()
    if scheduler_mode == "hyline":
        return simulate(topo, trace, params)
    if scheduler_mode in ("baseline_fair", "baseline_srpt"):
        from .baselines import fluid_run

        policy = "maxmin" if scheduler_mode == "baseline_fair" else "srpt"
        rep = fluid_run(trace, topo, policy)
        rep.cls = classify(rep.size, params.h_bytes)
        rep.scheme = scheduler_mode
        return rep
    raise ValueError(f"unknown scheduler mode {scheduler_mode!r}; expected one of {MODES}")
