import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyline.metrics import ideal_fct
from hyline.simengine import SimParams, classify, run, simulate
from hyline.workload import FlowTrace, SizeDistribution, WorkloadSpec, generate_trace

PKT_TIME = 1500 * 8 / 1e9


def trace(rows):
    a, s, d, z = zip(*rows)
    return FlowTrace(np.array(a, float), np.array(s), np.array(d), np.array(z, np.int64))


def clean(rep):
    st_ = rep.stats
    for k in (
        "strict_priority_violations",
        "exclusivity_violations",
        "class2_reorder_violations",
        "conservation_violations",
        "man_invariant_violations",
        "man_preemption_violations",
        "man_work_bound_violations",
    ):
        assert st_[k] == 0, k


def test_classify_boundary():
    assert classify([999_999, 1_000_000, 1_000_001], 1_000_000).tolist() == [1, 1, 2]


def test_single_flows_match_ideal(topo):
    rng = np.random.default_rng(11)
    h = topo.hosts
    for _ in range(50):
        s, d = rng.choice(len(h), 2, replace=False)
        size = int(rng.integers(1, 3_000_000))
        rep = simulate(topo, trace([(0.0, h[s], h[d], size)]))
        extra = 100e-6 if size > 1_000_000 else 0.0
        assert abs(rep.fct[0] - extra - ideal_fct(topo, h[s], h[d], size)) <= PKT_TIME
        assert rep.retx[0] == 0
        clean(rep)


def test_one_megabyte_is_first_class(topo):
    h = topo.hosts
    rep = simulate(topo, trace([(0.0, h[0], h[9], 1_000_000)]))
    assert rep.cls[0] == 1 and rep.wait[0] == 0.0
    assert rep.fct[0] == pytest.approx(ideal_fct(topo, h[0], h[9], 1_000_000), abs=PKT_TIME)


def test_rts_wait_is_tcost(topo):
    h = topo.hosts
    for tc in (0.0, 100e-6, 1e-3):
        rep = simulate(topo, trace([(0.002, h[3], h[12], 2_000_000)]), SimParams(t_cost=tc))
        assert rep.start[0] - rep.arrival[0] == pytest.approx(tc, abs=1e-12)
        assert rep.wait[0] == pytest.approx(tc, abs=1e-12)
        assert rep.stopped[0] == 0 and rep.preemptions[0] == 0


def test_same_pair_second_class_runs_after_fin(topo):
    h = topo.hosts
    size = 3_000_000
    rep = simulate(topo, trace([(0.0, h[0], h[1], size), (1e-6, h[0], h[1], size)]))
    # FIN leaves with the first transmission of the last packet
    fin = rep.start[0] + (size // 1500 - 1) * PKT_TIME
    assert rep.start[1] == pytest.approx(fin + 100e-6, abs=1e-9)
    assert rep.finish[1] > rep.finish[0]
    assert rep.preemptions.tolist() == [0, 0]
    clean(rep)


def test_fig1_chain_total(topo):
    # C (h0->h1) needs h0's uplink, held by A (h0->h2), and h1's downlink,
    # held by B (h3->h1).  Remaining 5 and 4 units against 3: no preemption.
    h = topo.hosts
    unit = 10_000_000
    rows = [(0.0, h[0], h[2], 5 * unit), (0.0, h[3], h[1], 4 * unit), (1e-4, h[0], h[1], 3 * unit)]
    rep = simulate(topo, trace(rows))
    assert rep.preemptions.tolist() == [0, 0, 0]
    assert rep.stats["man_preemptions"] == 0
    u = unit * 8 / 1e9
    assert rep.fct.sum() / u == pytest.approx(17, rel=0.01)
    # C starts only after A is done sending
    assert rep.start[2] >= rep.finish[0] - 0.01


def test_injected_drop_one_retransmission(topo):
    h = topo.hosts
    for size, seq in ((500_000, 40), (5_000_000, 1500)):
        rep = simulate(topo, trace([(0.0, h[0], h[9], size)]), SimParams(drop_once={0: seq}))
        assert rep.stats["drops_injected"] == 1
        assert rep.retx[0] == 1 and rep.stats["retransmissions"] == 1
        assert rep.stats["duplicate_deliveries"] == 0
        assert rep.stats["timeouts"] == 0
        clean(rep)


def test_long_stop_no_timeouts(topo):
    h = topo.hosts
    # 62.5 MB takes 500 ms at line rate; it preempts the 90 MB flow
    rep = simulate(topo, trace([(0.0, h[0], h[1], 90_000_000), (0.01, h[2], h[1], 62_500_000)]))
    assert rep.preemptions.tolist() == [1, 0]
    assert rep.stopped[0] >= 0.5
    assert rep.stats["timeouts"] == 0
    clean(rep)


def test_incast_drops_without_pfc_and_pauses_with(topo):
    h = topo.hosts
    rows = [(0.0, h[i], h[0], 900_000) for i in range(1, 16)]
    off = simulate(topo, trace(rows), SimParams(pfc_enabled=False))
    assert off.stats["drops_class1"] > 0
    assert off.stats["max_port_occupancy"] == 225
    assert np.all(off.finish > 0)
    on = simulate(topo, trace(rows), SimParams(pfc_enabled=True))
    assert on.stats["max_port_occupancy"] <= 225
    assert np.all(on.finish > 0)
    clean(off)
    clean(on)


def test_second_class_incast_pfc(topo):
    h = topo.hosts
    # background class-1 incast plus class-2 traffic into the same edge
    rows = [(0.0, h[i], h[0], 900_000) for i in range(2, 16)]
    rows += [(0.0, h[1], h[0], 20_000_000), (0.0, h[5], h[1], 20_000_000)]
    rows.sort()
    rep = simulate(topo, trace(rows), SimParams(pfc_enabled=True))
    assert rep.stats["drops_class2"] == 0
    clean(rep)


def _small_run(topo, load, seed, n=400, **kw):
    d = SizeDistribution.builtin("websearch")
    tr = generate_trace(WorkloadSpec(d, load, flow_count=n, rng_seed=seed), topo)
    return tr, simulate(topo, tr, SimParams(seed=seed, **kw))


@settings(max_examples=6, deadline=None)
@given(st.sampled_from([0.3, 0.6, 0.8]), st.integers(0, 1000))
def test_random_runs_hold_invariants(load, seed):
    from hyline.topology import build_fat_tree, delay_for_rtt

    topo = build_fat_tree(4, 2, 1e9, delay_for_rtt(300e-6))
    tr, rep = _small_run(topo, load, seed)
    clean(rep)
    assert rep.stats["drops_class2"] == 0
    assert np.all(rep.finish > rep.arrival)
    # no flow beats its empty-fabric time
    ideal = np.array([ideal_fct(topo, s, d, z) for s, d, z in zip(tr.src, tr.dst, tr.size)])
    assert np.all(rep.fct >= ideal * (1 - 1e-9) - 1e-9)


def test_deterministic_csv(topo, tmp_path):
    _, a = _small_run(topo, 0.6, 5)
    _, b = _small_run(topo, 0.6, 5)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_event_limit_raises(topo):
    from hyline.simengine import DeadlockError

    with pytest.raises(DeadlockError):
        _small_run(topo, 0.6, 1, n=50, max_events=1000)


def test_params_validated(topo):
    h = topo.hosts
    with pytest.raises(ValueError):
        simulate(topo, trace([(0.0, h[0], h[1], 10)]), SimParams(pause_pkts=230))
    with pytest.raises(ValueError):
        run(topo, trace([(0.0, h[0], h[1], 10)]), "qjump")


CHILD = r"""
import numpy as np
from hyline.topology import build_fat_tree, delay_for_rtt
from hyline.workload import SizeDistribution, WorkloadSpec, generate_trace
from hyline.simengine import simulate, SimParams
topo = build_fat_tree(4, 2, 1e9, delay_for_rtt(300e-6))
tr = generate_trace(WorkloadSpec(SizeDistribution.builtin("websearch"), 0.6, flow_count=25, rng_seed=2), topo)
rep = simulate(topo, tr, SimParams(seed=2))
rep.to_csv("{out}")
"""


def test_jit_and_numpy_agree(tmp_path):
    outs = []
    for flag in ("0", "1"):
        out = tmp_path / f"r{flag}.csv"
        env = dict(os.environ, HYLINE_DISABLE_JIT=flag)
        subprocess.run([sys.executable, "-c", CHILD.format(out=out)], env=env, check=True, timeout=600)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
