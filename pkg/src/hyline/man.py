"""Central manager for 2nd-class flows.

Flows above the class threshold ask the manager for permission before
sending.  The manager keeps every such flow in a list sorted by remaining
size, tracks which permitted flow occupies which link, and answers each
request with CTS (carrying a path) or STS messages.  Preemption happens only
when stopping the conflicting flows costs the total completion time less than
waiting behind the largest of them.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set

from .topology import Path, Topology, enumerate_paths

FIRST, SECOND = "first", "second"
NEW, PERMITTED, STOPPED, FINISHED = "new", "permitted", "stopped", "finished"
CTS, STS = "CTS", "STS"

_EPS = 1e-9


class SchedulerError(ValueError):
    pass


@dataclass(eq=False)
class Flow:
    id: int
    src: int
    dst: int
    size: float
    cls: str = SECOND
    rate: Optional[float] = None  # line rate in bits/s
    arrival_time: float = 0.0
    remaining: float = field(default=-1.0)
    state: str = NEW
    path: Optional[Path] = None
    grant_times: List[float] = field(default_factory=list)
    stop_times: List[float] = field(default_factory=list)
    preemptions: int = 0
    _sent: float = 0.0  # bytes credited for closed permission intervals

    def __post_init__(self):
        if self.remaining < 0:
            self.remaining = float(self.size)


@dataclass(frozen=True)
class Message:
    kind: str
    flow_id: int
    path: Optional[Path] = None


@dataclass
class PathEvaluation:
    path: Path
    feasible: bool
    n_preempt: int
    preempt_list: List[int]
    max_conflict_remaining: float
    remaining_bw: float
    combinations: int = 0


@dataclass
class FindResult:
    found: bool
    preempt_list: List[int]
    path: Optional[Path]
    evaluations: List[PathEvaluation]
    min_max_prio: float


def path_cost_no_preempt(ev: PathEvaluation) -> float:
    """Extra total completion time if the new flow waits for the path."""
    return ev.max_conflict_remaining


def path_cost_preempt(ev: PathEvaluation, new_flow: Flow) -> float:
    """Extra total completion time if the new flow preempts on the path."""
    return ev.n_preempt * new_flow.remaining


class ManState:
    def __init__(
        self,
        capacity: Mapping[int, float],
        paths: Callable[[int, int], Sequence[Path]],
        line_rate: float,
        seed: int = 0,
    ):
        self.capacity = capacity
        self._paths = paths
        self.line_rate = float(line_rate)
        self.rng = random.Random(seed)
        self.now = 0.0
        self.flow_list: List[Flow] = []
        self.flows: Dict[int, Flow] = {}
        self.link_occupancy: Dict[int, Set[int]] = {}
        # telemetry
        self.requests = 0
        self.find_path_calls = 0
        self.evaluations = 0
        self.max_find_path_evaluations = 0
        self.work_bound_violations = 0
        self.preemption_violations = 0
        self.preemptions = 0

    @classmethod
    def for_topology(cls, topo: Topology, seed: int = 0) -> "ManState":
        cap = {l.id: l.capacity for l in topo.links}
        cache: Dict[tuple, List[Path]] = {}

        def paths(src, dst):
            key = (src, dst)
            if key not in cache:
                cache[key] = enumerate_paths(topo, src, dst)
            return cache[key]

        rate = min(l.capacity for l in topo.links)
        return cls(cap, paths, rate, seed)

    def paths(self, src: int, dst: int) -> Sequence[Path]:
        return self._paths(src, dst)

    def set_time(self, now: float) -> None:
        if now < self.now - _EPS:
            raise SchedulerError(f"time went backwards: {now} < {self.now}")
        self.now = now
        self.update_all()

    # -- remaining-size bookkeeping ------------------------------------

    def _estimate(self, f: Flow, now: float) -> float:
        sent = f._sent
        if f.state == PERMITTED and f.grant_times:
            sent += (now - f.grant_times[-1]) * f.rate / 8.0
        return max(0.0, f.size - sent)

    def update_remaining(self, f: Flow, now: Optional[float] = None) -> float:
        if f.id not in self.flows:
            raise SchedulerError(f"flow {f.id} is not managed")
        if now is not None:
            self.now = now
        old = f.remaining
        f.remaining = self._estimate(f, self.now)
        if f.remaining != old:
            self._sort()
        return f.remaining

    def update_all(self) -> None:
        for f in self.flow_list:
            f.remaining = self._estimate(f, self.now)
        self._sort()

    def _sort(self):
        self.flow_list.sort(key=lambda g: (g.remaining, g.id))

    # -- occupancy -----------------------------------------------------

    def _occupants(self, link: int) -> Set[int]:
        return self.link_occupancy.get(link, set())

    def _add_to_path(self, f: Flow, path: Path) -> None:
        for l in path.links:
            self.link_occupancy.setdefault(l, set()).add(f.id)
        f.path = path
        f.state = PERMITTED
        f.grant_times.append(self.now)

    def _remove_from_path(self, f: Flow) -> None:
        if f.path is not None:
            for l in f.path.links:
                occ = self.link_occupancy.get(l)
                if occ is not None:
                    occ.discard(f.id)
                    if not occ:
                        del self.link_occupancy[l]
        if f.state == PERMITTED and f.grant_times:
            f._sent += (self.now - f.grant_times[-1]) * f.rate / 8.0
        f.path = None

    # -- path evaluation ----------------------------------------------

    def evaluate_path(self, f: Flow, path: Path) -> PathEvaluation:
        flows = self.flows
        occupants: Set[int] = set()
        for l in path.links:
            occupants |= self._occupants(l)
        occupants.discard(f.id)
        p_max = max((flows[g].remaining for g in occupants), default=0.0)

        per_link = []
        for l in path.links:
            occ = sorted(self._occupants(l) - {f.id})
            load = sum(flows[g].rate for g in occ)
            cap = self.capacity[l]
            if load + f.rate <= cap * (1 + _EPS):
                per_link.append([()])
                continue
            eligible = [g for g in occ if flows[g].remaining > f.remaining]
            opts = []
            for r in range(1, len(eligible) + 1):
                for combo in itertools.combinations(eligible, r):
                    freed = sum(flows[g].rate for g in combo)
                    if load - freed + f.rate <= cap * (1 + _EPS):
                        opts.append(combo)
                if opts:
                    break
            if not opts:
                return PathEvaluation(path, False, 0, [], p_max, 0.0, 0)
            per_link.append(opts)

        best = None
        combos = 0
        for choice in itertools.product(*per_link):
            combos += 1
            preempt = set()
            for c in choice:
                preempt.update(c)
            if best is None or len(preempt) < len(best):
                best = preempt
        preempt_list = sorted(best, key=lambda g: (flows[g].remaining, g))
        rem_bw = math.inf
        for l in path.links:
            used = sum(flows[g].rate for g in self._occupants(l) if g not in best and g != f.id)
            rem_bw = min(rem_bw, self.capacity[l] - used)
        return PathEvaluation(
            path, True, len(preempt_list), preempt_list, p_max, rem_bw, combos
        )

    def work_bound(self, paths: Sequence[Path]) -> int:
        ratio = max(1, int(max(self.capacity.values()) // self.line_rate))
        return sum(ratio ** len(p) for p in paths)

    def find_path(self, f: Flow) -> FindResult:
        paths = self.paths(f.src, f.dst)
        self.find_path_calls += 1
        if not paths:
            return FindResult(False, [], None, [], math.inf)
        evals = [self.evaluate_path(f, p) for p in paths]
        n_combos = sum(max(1, e.combinations) for e in evals)
        self.evaluations += n_combos
        self.max_find_path_evaluations = max(self.max_find_path_evaluations, n_combos)
        if n_combos > self.work_bound(paths):
            self.work_bound_violations += 1

        min_max_prio = min(e.max_conflict_remaining for e in evals)
        feasible = [e for e in evals if e.feasible]
        if not feasible:
            return FindResult(False, [], None, evals, min_max_prio)
        best_cost = min(path_cost_preempt(e, f) for e in feasible)
        tied = [e for e in feasible if path_cost_preempt(e, f) == best_cost]
        best_bw = max(e.remaining_bw for e in tied)
        tied = [e for e in tied if e.remaining_bw == best_bw]
        pick = tied[0] if len(tied) == 1 else self.rng.choice(tied)
        if pick.n_preempt == 0 or best_cost < min_max_prio:
            return FindResult(True, list(pick.preempt_list), pick.path, evals, min_max_prio)
        return FindResult(False, [], None, evals, min_max_prio)

    # -- algorithm ------------------------------------------------------

    def _admit(self, f: Flow, res: FindResult, msgs: List[Message]) -> List[Flow]:
        preempted = []
        for gid in res.preempt_list:
            g = self.flows[gid]
            if not g.remaining > f.remaining:
                self.preemption_violations += 1
            self._remove_from_path(g)
            g.state = STOPPED
            g.stop_times.append(self.now)
            g.preemptions += 1
            self.preemptions += 1
            msgs.append(Message(STS, gid))
            preempted.append(g)
        self._add_to_path(f, res.path)
        msgs.append(Message(CTS, f.id, res.path))
        return preempted

    def new_request(self, f: Flow, now: Optional[float] = None) -> List[Message]:
        if f.id in self.flows:
            raise SchedulerError(f"duplicate flow id {f.id}")
        if now is not None:
            self.set_time(now)
        if f.rate is None:
            f.rate = self.line_rate
        f.state = NEW
        f.remaining = float(f.size)
        self.flows[f.id] = f
        self.flow_list.append(f)
        self.update_all()
        self.requests += 1
        return self.schedule(f)

    def schedule(self, f: Flow) -> List[Message]:
        msgs: List[Message] = []
        res = self.find_path(f)
        if not res.found:
            f.state = STOPPED
            msgs.append(Message(STS, f.id))
            return msgs
        preempted = self._admit(f, res, msgs)
        msgs.extend(self.reschedule(exclude={g.id for g in preempted}))
        return msgs

    def reschedule(self, exclude: Iterable[int] = ()) -> List[Message]:
        exclude = set(exclude)
        msgs: List[Message] = []
        snapshot = [
            g for g in self.flow_list if g.state == STOPPED and g.id not in exclude
        ]
        for g in snapshot:
            if g.state != STOPPED:
                continue
            res = self.find_path(g)
            if res.found:
                self._admit(g, res, msgs)
        return msgs

    def remove_request(self, f: Flow, now: Optional[float] = None) -> List[Message]:
        if self.flows.get(f.id) is not f:
            raise SchedulerError(f"unknown flow {f.id}")
        if now is not None:
            self.set_time(now)
        self._remove_from_path(f)
        f.state = FINISHED
        f.remaining = self._estimate(f, self.now)
        self.flow_list.remove(f)
        del self.flows[f.id]
        return self.reschedule()

    # -- invariant checks -----------------------------------------------

    def check_invariants(self) -> List[str]:
        problems = []
        for i in range(1, len(self.flow_list)):
            a, b = self.flow_list[i - 1], self.flow_list[i]
            if (a.remaining, a.id) > (b.remaining, b.id):
                problems.append(f"flow_list out of order at {i}")
        expected: Dict[int, Set[int]] = {}
        for g in self.flow_list:
            if (g.state == PERMITTED) != (g.path is not None):
                problems.append(f"flow {g.id} state/path mismatch")
            if g.state == PERMITTED:
                for l in g.path.links:
                    expected.setdefault(l, set()).add(g.id)
        if expected != self.link_occupancy:
            problems.append("link_occupancy differs from permitted paths")
        for l, occ in self.link_occupancy.items():
            load = sum(self.flows[g].rate for g in occ)
            if load > self.capacity[l] * (1 + _EPS):
                problems.append(f"link {l} over capacity ({len(occ)} flows)")
        return problems
