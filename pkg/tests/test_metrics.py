import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyline import metrics
from hyline.report import RunReport, read_stats
from hyline.topology import PACKET_BYTES, enumerate_paths

from oracles import nearest_rank_sorted


def make_report(sizes, fct_factor, topo, scheme="hyline", cls=None):
    n = len(sizes)
    h = topo.hosts
    sizes = np.asarray(sizes, np.int64)
    plen = np.full(n, 6)
    cap = 1e9
    delay = topo.links[0].propagation_delay
    ideal = metrics.ideal_fct_by_len(plen, sizes, cap, delay)
    arrival = np.arange(n) * 1e-3
    z = np.zeros(n, np.int64)
    return RunReport(
        np.arange(n), np.ones(n, np.int64) if cls is None else np.asarray(cls), sizes, arrival, arrival,
        arrival + ideal * np.asarray(fct_factor, float), plen, z, z.copy(), np.zeros(n), np.zeros(n), scheme, {},
    )


def test_size_bins_right_closed():
    KB, MB = 1000, 1_000_000
    got = metrics.size_bin([1, 100 * KB, 100 * KB + 1, MB, MB + 1, 10 * MB, 10 * MB + 1]).tolist()
    assert got == [0, 0, 1, 1, 2, 2, 3]


def test_ideal_fct_examples(topo):
    h = topo.hosts
    d = topo.links[0].propagation_delay
    assert metrics.ideal_fct(topo, h[0], h[1], 1500) == pytest.approx(2 * d + 2 * 12e-6)
    ten = metrics.ideal_fct(topo, h[0], h[9], 10_000_000)
    assert 80e-3 < ten < 81e-3
    # vectorized form agrees with the path walk
    for s, dd, z in [(h[0], h[1], 700), (h[0], h[2], 5000), (h[3], h[14], 2_500_000)]:
        pl = len(enumerate_paths(topo, s, dd)[0])
        assert metrics.ideal_fct_by_len(pl, z, 1e9, d) == pytest.approx(metrics.ideal_fct(topo, s, dd, z))


def test_p99_known_values():
    vals = list(range(1, 101))
    np.random.default_rng(0).shuffle(vals)
    assert metrics.nearest_rank(vals, 0.99) == 99
    assert metrics.nearest_rank([5.0], 0.99) == 5.0
    with pytest.raises(ValueError):
        metrics.nearest_rank([], 0.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=300), st.floats(0.01, 1.0))
def test_nearest_rank_oracle(vals, q):
    assert metrics.nearest_rank(vals, q) == nearest_rank_sorted(vals, q)


def test_uncontended_summary(topo):
    rep = make_report([5000, 50_000, 500_000, 5_000_000, 50_000_000] * 20, 1.0, topo)
    s = metrics.summarize(rep, topo, 0.6)
    for b in s.bins.values():
        assert b.mean_nfct == pytest.approx(1.0) and b.app_tput == 1.0
    assert s.bins[metrics.ALL].count == 90  # first 10% excluded
    assert sum(s.bins[l].count for l in metrics.BIN_LABELS) == 90


def test_deadline_and_monotonicity(topo):
    f = np.array([1.0, 3.9, 3.999, 4.1, 10.0] * 4)
    rep = make_report([10_000] * 20, f, topo)
    s = metrics.summarize(rep, topo, warmup_frac=0.0)
    assert s.bins[metrics.ALL].app_tput == pytest.approx(12 / 20)
    loose = metrics.summarize(rep, topo, warmup_frac=0.0, deadline_factor=5.0)
    assert loose.bins[metrics.ALL].app_tput >= s.bins[metrics.ALL].app_tput


def test_unfinished_rejected(topo):
    rep = make_report([10_000] * 3, 1.0, topo)
    rep.finish[1] = -1.0
    with pytest.raises(ValueError):
        metrics.summarize(rep, topo)


def test_man_telemetry_rows(topo):
    rep = make_report([5_000_000] * 10 + [50_000] * 10, 1.5, topo, cls=[2] * 10 + [1] * 10)
    rep.wait[:] = 100e-6
    s = metrics.summarize(rep, topo, 0.6)
    rows = {r["bin"]: r for r in s.man_stats}
    assert rows[metrics.ALL]["count"] == 8  # first two arrivals are warm-up
    assert rows[metrics.ALL]["mean_wait_s"] == pytest.approx(100e-6)
    assert rows[metrics.ALL]["mean_preemptions"] == 0


def test_csv_roundtrips(topo, tmp_path):
    rep = make_report([5000, 2_000_000, 30_000_000] * 5, [1.0, 1.3, 2.2] * 5, topo, cls=[1, 2, 2] * 5)
    rep.stats = {"events": 10, "sim_time_s": 0.25}
    rep.to_csv(tmp_path / "r.csv")
    back = RunReport.from_csv(tmp_path / "r.csv", scheme="hyline")
    for name in ("flow_id", "cls", "size", "arrival", "start", "finish", "path_len", "retx", "preemptions", "wait", "stopped"):
        assert np.array_equal(getattr(rep, name), getattr(back, name))
    rep.write_stats(tmp_path / "s.csv")
    assert read_stats(tmp_path / "s.csv") == {"events": 10.0, "sim_time_s": 0.25}
    s = metrics.summarize(rep, topo, 0.6)
    metrics.write_summary(s, tmp_path / "sum.csv")
    assert metrics.read_rows(tmp_path / "sum.csv") == s.rows()
    metrics.write_man_stats(s, tmp_path / "man.csv")
    again = metrics.read_rows(tmp_path / "man.csv")
    assert len(again) == len(s.man_stats)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        RunReport.from_csv(tmp_path / "bad.csv")
