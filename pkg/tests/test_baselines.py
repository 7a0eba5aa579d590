import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyline.baselines import fluid_run, maxmin_rates
from hyline.topology import build_fat_tree, enumerate_paths
from hyline.workload import FlowTrace

from oracles import fluid_maxmin_check, progressive_filling, srpt_single_link


def trace(rows):
    a, s, d, z = zip(*rows)
    return FlowTrace(np.array(a, float), np.array(s), np.array(d), np.array(z, np.int64))


@pytest.mark.parametrize("policy", ["maxmin", "srpt"])
def test_single_flow_is_size_over_rate(topo0, policy):
    h = topo0.hosts
    rep = fluid_run(trace([(0.0, h[0], h[9], 1_000_000)]), topo0, policy, include_path_latency=False)
    assert rep.finish[0] == pytest.approx(8e-3, rel=1e-12)


def test_path_latency_offset(topo):
    h = topo.hosts
    rep = fluid_run(trace([(0.0, h[0], h[9], 1_000_000)]), topo, "maxmin")
    from hyline.metrics import ideal_fct

    assert rep.finish[0] == pytest.approx(ideal_fct(topo, h[0], h[9], 1_000_000), rel=1e-12)


def test_two_equal_flows_share(topo0):
    h = topo0.hosts
    rep = fluid_run(
        trace([(0.0, h[0], h[1], 1_000_000), (0.0, h[0], h[1], 1_000_000)]),
        topo0, "maxmin", include_path_latency=False,
    )
    assert rep.finish[0] == rep.finish[1] == pytest.approx(16e-3)


def test_srpt_two_flows(topo0):
    h = topo0.hosts
    rows = [(0.0, h[0], h[1], 2_000_000), (0.0, h[0], h[1], 10_000_000)]
    rep = fluid_run(trace(rows), topo0, "srpt", include_path_latency=False)
    assert rep.finish.tolist() == pytest.approx([16e-3, 96e-3])
    fair = fluid_run(trace(rows), topo0, "maxmin", include_path_latency=False)
    assert fair.finish.tolist() == pytest.approx([32e-3, 96e-3])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 0.05), st.integers(1_000, 3_000_000)), min_size=1, max_size=25))
def test_srpt_single_link_textbook(jobs):
    topo0 = build_fat_tree(4, 2, 1e9, 0.0)
    h = topo0.hosts
    jobs = sorted(jobs)
    rows = [(a, h[0], h[1], z) for a, z in jobs]
    # distinct arrivals keep the order unambiguous
    rows = [(a + i * 1e-9, s, d, z) for i, (a, s, d, z) in enumerate(rows)]
    rep = fluid_run(trace(rows), topo0, "srpt", include_path_latency=False)
    ref = srpt_single_link([r[0] for r in rows], [r[3] for r in rows], 1e9)
    assert rep.finish.tolist() == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_srpt_blocked_flow_idles_link(topo0):
    h = topo0.hosts
    # the big flow shares the destination link with a smaller one: it waits
    rows = [(0.0, h[2], h[1], 1_000_000), (0.0, h[0], h[1], 3_000_000)]
    rep = fluid_run(trace(rows), topo0, "srpt", include_path_latency=False)
    assert rep.finish.tolist() == pytest.approx([8e-3, 32e-3])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(0, 5), min_size=1, max_size=3, unique=True), min_size=1, max_size=8),
       st.lists(st.integers(1, 5), min_size=6, max_size=6))
def test_maxmin_matches_oracles(flows, caps):
    n = len(flows)
    pl = np.full((n, 3), -1, np.int64)
    pn = np.array([len(f) for f in flows], np.int64)
    for i, f in enumerate(flows):
        pl[i, : len(f)] = f
    cap = np.array(caps, float)
    rate = np.zeros(n)
    maxmin_rates(np.arange(n), n, pl, pn, cap, rate, np.zeros(6), np.zeros(6, np.int64), np.zeros(n, np.int64))
    ref = progressive_filling([set(f) for f in flows], {l: c for l, c in enumerate(caps)})
    assert rate.tolist() == pytest.approx([float(r) for r in ref], rel=1e-9)
    assert fluid_maxmin_check([set(f) for f in flows], rate.tolist(), dict(enumerate(caps)))


def test_report_schema(topo):
    h = topo.hosts
    rep = fluid_run(trace([(0.0, h[0], h[5], 5000), (0.001, h[3], h[12], 50000)]), topo, "srpt")
    assert rep.scheme == "baseline_srpt"
    assert rep.path_len.tolist() == [len(enumerate_paths(topo, h[0], h[5])[0]), 6]
    assert np.all(rep.finish > rep.arrival)
    with pytest.raises(ValueError):
        fluid_run(trace([(0.0, h[0], h[5], 5000)]), topo, "edf")
