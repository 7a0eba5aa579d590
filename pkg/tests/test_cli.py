import csv

import pytest

from hyline import cli, metrics
from hyline.config import ConfigError, load_config, parse_override
from hyline.report import RunReport
from hyline.simengine import DeadlockError


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "run"
    rc = cli.main(["run", "--flows", "150", "--seed", "3", "--out", str(out)])
    assert rc == cli.EXIT_OK
    for name in ("trace.csv", "report.csv", "stats.csv", "summary.csv"):
        assert (out / name).exists()
    rep = RunReport.from_csv(out / "report.csv")
    assert len(rep) == 150
    summ = metrics.read_rows(out / "summary.csv")
    assert any(r["bin"] == "all" for r in summ)


def test_run_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["run", "--flows", "120", "--seed", "7", "--out", str(d)]) == 0
    for name in ("report.csv", "summary.csv", "stats.csv", "trace.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_baseline_run(tmp_path):
    out = tmp_path / "fair"
    assert cli.main(["run", "--mode", "baseline_fair", "--flows", "100", "--out", str(out)]) == 0
    assert RunReport.from_csv(out / "report.csv").finish.min() > 0


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--set", "topology.kk=4"],
        ["run", "--set", "switch.pfc_enabled=maybe"],
        ["run", "--load", "1.2"],
        ["run", "--mode", "qjump"],
        ["run", "--set", "switch.pause_pkts=300"],
        ["run", "--set", "workload.file=/nonexistent.cdf"],
        ["run", "--set", "topology.k=5"],
    ],
)
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_bad_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("topology: [unclosed\n")
    assert cli.main(["run", "-c", str(p)]) == cli.EXIT_CONFIG
    p.write_text("- a\n- b\n")
    assert cli.main(["run", "-c", str(p)]) == cli.EXIT_CONFIG


def test_yaml_config_and_overrides(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("workload:\n  pareto: {frac_below: 0.8}\n  flows: 50\nhyline:\n  h_bytes: 500000\n")
    cfg = load_config(str(p), [parse_override("hyline.t_cost_us=50")])
    assert cfg.sim_params().h_bytes == 500000 and cfg.sim_params().t_cost == pytest.approx(50e-6)
    assert cfg.distribution().name.startswith("pareto")
    with pytest.raises(ConfigError):
        parse_override("novalue")


def test_deadlock_exit_3(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise DeadlockError("stuck")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["run", "--flows", "10", "--out", str(tmp_path)]) == cli.EXIT_DEADLOCK


def _sweep_args(out, jobs=1):
    return [
        "sweep", "--flows", "80", "--out", str(out), "--jobs", str(jobs),
        "--set", "sweep.loads=[0.3,0.6,0.8]",
        "--set", "sweep.seeds=[1,2]",
        "--set", "sweep.schemes=[hyline,baseline_fair]",
    ]


def test_sweep_merge_and_resume(tmp_path, capsys):
    out = tmp_path / "sw"
    assert cli.main(_sweep_args(out)) == cli.EXIT_OK
    merged = rows(out / "merged.csv")
    assert len(merged) == 3 * 2 * 2
    assert {(r["scheme"], float(r["load"]), int(r["seed"])) for r in merged} == {
        (s, l, d) for s in ("hyline", "baseline_fair") for l in (0.3, 0.6, 0.8) for d in (1, 2)
    }
    agg = rows(out / "aggregate.csv")
    assert all(int(r["seeds"]) == 2 for r in agg)
    assert rows(out / "failures.csv") == []
    before = (out / "merged.csv").read_bytes()
    capsys.readouterr()
    assert cli.main(_sweep_args(out)) == cli.EXIT_OK
    assert "skipping 12 completed cells" in capsys.readouterr().out
    assert (out / "merged.csv").read_bytes() == before
    # report re-merges
    assert cli.main(["report", "--out", str(out), "--set", "sweep.loads=[0.3,0.6,0.8]",
                     "--set", "sweep.seeds=[1,2]", "--set", "sweep.schemes=[hyline,baseline_fair]"]) == 0
    assert (out / "merged.csv").read_bytes() == before


def test_sweep_parallel_matches_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(_sweep_args(a, 1)) == 0
    assert cli.main(_sweep_args(b, 2)) == 0
    assert (a / "merged.csv").read_bytes() == (b / "merged.csv").read_bytes()


def test_sweep_failed_cells(tmp_path, monkeypatch):
    real = cli.run

    def flaky(topo, trace, mode, params):
        if mode == "hyline" and params.seed == 2:
            raise RuntimeError("injected")
        return real(topo, trace, mode, params)

    monkeypatch.setattr(cli, "run", flaky)
    out = tmp_path / "sw"
    assert cli.main(_sweep_args(out)) == cli.EXIT_CELLS_FAILED
    assert len(rows(out / "merged.csv")) == 12 - 3
    assert len(rows(out / "failures.csv")) == 3


def test_threshold_command(tmp_path, capsys):
    out = tmp_path / "th"
    assert cli.main(["threshold", "--out", str(out), "--set", "threshold.points=20"]) == 0
    text = capsys.readouterr().out
    assert "is inside" in text
    r = rows(out / "threshold.csv")
    assert len(r) == 9 * 20
    assert {float(x["load"]) for x in r} == {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}


def test_report_single_run(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["run", "--flows", "100", "--out", str(out)]) == 0
    first = (out / "summary.csv").read_bytes()
    assert cli.main(["report", "--out", str(out)]) == 0
    assert (out / "summary.csv").read_bytes() == first
    assert cli.main(["report", "--out", str(tmp_path / "none")]) == cli.EXIT_CONFIG
