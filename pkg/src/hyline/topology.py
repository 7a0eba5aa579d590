"""Three-tier fat-tree fabrics, shortest-path enumeration and ECMP hashing."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

HOST, EDGE, AGG, CORE = "host", "edge", "agg", "core"

PACKET_BYTES = 1500
ACK_BYTES = 40


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    pod: int  # -1 for core switches
    index: int  # position within its tier (and pod)


@dataclass(frozen=True)
class Link:
    id: int
    src_node: int
    dst_node: int
    capacity: float  # bits/s
    propagation_delay: float  # seconds


@dataclass(frozen=True)
class Path:
    links: Tuple[int, ...]

    def __len__(self):
        return len(self.links)


@dataclass
class Topology:
    nodes: List[Node]
    links: List[Link]
    k: int
    hosts_per_edge: int
    hosts: List[int] = field(default_factory=list)
    _link_index: Dict[Tuple[int, int], int] = field(default_factory=dict, repr=False)
    _host_edge: Dict[int, int] = field(default_factory=dict, repr=False)
    _edges: List[List[int]] = field(default_factory=list, repr=False)  # [pod][e]
    _aggs: List[List[int]] = field(default_factory=list, repr=False)  # [pod][a]
    _cores: List[int] = field(default_factory=list, repr=False)
    _mid_cache: Dict[Tuple[int, int], List[Tuple[int, ...]]] = field(
        default_factory=dict, repr=False
    )

    @property
    def n_switches(self) -> int:
        return sum(1 for n in self.nodes if n.kind != HOST)

    @property
    def n_hosts(self) -> int:
        return len(self.hosts)

    def link_between(self, a: int, b: int) -> int:
        return self._link_index[(a, b)]

    def edge_of(self, host: int) -> int:
        return self._host_edge[host]

    def is_host(self, node: int) -> bool:
        return 0 <= node < len(self.nodes) and self.nodes[node].kind == HOST

    def dump(self) -> str:
        """Plain-text adjacency listing, one link per line."""
        return "".join(
            f"{l.id} {l.src_node} {l.dst_node} {l.capacity:.0f} {l.propagation_delay:.9g}\n"
            for l in self.links
        )

    def _middle(self, e1: int, e2: int) -> List[Tuple[int, ...]]:
        key = (e1, e2)
        cached = self._mid_cache.get(key)
        if cached is not None:
            return cached
        n1, n2 = self.nodes[e1], self.nodes[e2]
        li = self._link_index
        if e1 == e2:
            mids = [()]
        elif n1.pod == n2.pod:
            mids = [
                (li[(e1, a)], li[(a, e2)]) for a in self._aggs[n1.pod]
            ]
        else:
            half = self.k // 2
            mids = []
            for c in self._cores:
                i = self.nodes[c].index // half
                a1 = self._aggs[n1.pod][i]
                a2 = self._aggs[n2.pod][i]
                mids.append((li[(e1, a1)], li[(a1, c)], li[(c, a2)], li[(a2, e2)]))
        self._mid_cache[key] = mids
        return mids


def build_fat_tree(
    k: int,
    hosts_per_edge: int,
    link_capacity: float = 1e9,
    link_delay: float = 0.0,
) -> Topology:
    if k < 4 or k % 2:
        raise TopologyError(f"k must be an even integer >= 4, got {k}")
    if hosts_per_edge < 1:
        raise TopologyError("hosts_per_edge must be >= 1")
    if link_capacity <= 0:
        raise TopologyError("link_capacity must be positive")
    if link_delay < 0:
        raise TopologyError("link_delay must be non-negative")

    half = k // 2
    nodes: List[Node] = []

    def add(kind, pod, index):
        nodes.append(Node(len(nodes), kind, pod, index))
        return nodes[-1].id

    cores = [add(CORE, -1, c) for c in range(half * half)]
    aggs, edges = [], []
    for p in range(k):
        aggs.append([add(AGG, p, a) for a in range(half)])
        edges.append([add(EDGE, p, e) for e in range(half)])
    hosts = []
    host_edge = {}
    for p in range(k):
        for e in range(half):
            for h in range(hosts_per_edge):
                hid = add(HOST, p, (e * hosts_per_edge) + h)
                hosts.append(hid)
                host_edge[hid] = edges[p][e]

    links: List[Link] = []
    index: Dict[Tuple[int, int], int] = {}

    def cable(a, b):
        for s, d in ((a, b), (b, a)):
            index[(s, d)] = len(links)
            links.append(Link(len(links), s, d, float(link_capacity), float(link_delay)))

    for h in hosts:
        cable(h, host_edge[h])
    for p in range(k):
        for e in edges[p]:
            for a in aggs[p]:
                cable(e, a)
    for p in range(k):
        for i, a in enumerate(aggs[p]):
            for j in range(half):
                cable(a, cores[i * half + j])

    return Topology(
        nodes=nodes,
        links=links,
        k=k,
        hosts_per_edge=hosts_per_edge,
        hosts=hosts,
        _link_index=index,
        _host_edge=host_edge,
        _edges=edges,
        _aggs=aggs,
        _cores=cores,
    )


def delay_for_rtt(
    rtt: float,
    capacity: float = 1e9,
    hops: int = 6,
    data_bytes: int = PACKET_BYTES,
    ack_bytes: int = ACK_BYTES,
) -> float:
    """Per-link propagation delay giving an empty-fabric RTT of ``rtt``.

    The RTT is measured for one full data packet over ``hops`` links and its
    ACK back, each link store-and-forward.
    """
    serial = hops * (data_bytes + ack_bytes) * 8.0 / capacity
    if rtt < serial:
        raise TopologyError(
            f"rtt {rtt:g}s is shorter than the serialization floor {serial:g}s"
        )
    return (rtt - serial) / (2 * hops)


def enumerate_paths(t: Topology, src: int, dst: int) -> List[Path]:
    if not (t.is_host(src) and t.is_host(dst)):
        raise TopologyError(f"unknown host id in ({src}, {dst})")
    if src == dst:
        raise TopologyError("src and dst must differ")
    e1, e2 = t.edge_of(src), t.edge_of(dst)
    up = t.link_between(src, e1)
    down = t.link_between(e2, dst)
    return [Path((up,) + mid + (down,)) for mid in t._middle(e1, e2)]


def flow_hash(flow_key: Sequence[int]) -> int:
    return zlib.crc32(struct.pack("<4q", *flow_key))


def ecmp_select(t: Topology, flow_key: Sequence[int], paths: Sequence[Path]) -> Path:
    if len(paths) == 1:
        return paths[0]
    return paths[flow_hash(flow_key) % len(paths)]
