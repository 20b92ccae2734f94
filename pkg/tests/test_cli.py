import os
import subprocess
import sys

import pytest

from qon.cli import main
from qon.topology import load_topology
from qon.workload import DemandMatrix

LINE = "edge u1 s1 800 0.99\nedge s1 s2 400 0.99\nedge s2 u2 800 0.99\n"


@pytest.fixture
def line_file(tmp_path):
    path = tmp_path / "line.txt"
    path.write_text(LINE)
    return str(path)


def test_gen_topology(tmp_path, capsys):
    out = tmp_path / "t.txt"
    assert main(["gen-topology", "pa", "12", "2", "--seed", "3", "--out", str(out)]) == 0
    topo = load_topology(out.read_text())
    assert len(topo.nodes) == 12 and topo.has_parameters
    assert main(["gen-topology", "er", "8", "0.5", "--no-params"]) == 0
    assert "edge" in capsys.readouterr().out


def test_gen_topology_ignores_export_lp(tmp_path, caplog):
    assert main(["gen-topology", "pa", "5", "1", "--export-lp", str(tmp_path / "x.lp")]) == 0
    assert "ignored" in caplog.text
    assert not (tmp_path / "x.lp").exists()


def test_gen_workload(tmp_path, line_file):
    out = tmp_path / "w.csv"
    args = ["gen-workload", "--topology", line_file, "--pairs", "2", "--intervals", "4", "--spikes", "1",
            "--capacity-sets", "1", "--out", str(out)]
    assert main(args) == 0
    dm = DemandMatrix.from_csv(out.read_text())
    assert dm.shape == (2, 4)
    first = out.read_text()
    assert main(args) == 0
    assert out.read_text() == first
    assert main(["gen-workload", "--spike-mean", "5", "--pairs", "3", "--intervals", "2", "--out", str(out)]) == 0


def test_purify_table(capsys):
    assert main(["purify-table", "--fidelities", "0.9,0.5", "--targets", "0.95"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "F,F_target,k_max,g"
    assert lines[2].endswith(",inf")


def test_solve_prefill(tmp_path, line_file, capsys):
    demands = tmp_path / "d.csv"
    demands.write_text("pair,interval,demand,threshold\n0,0,0,0.8\n0,1,600,0.8\n")
    lp = tmp_path / "m.lp"
    sched = tmp_path / "s.csv"
    args = ["solve", "--topology", line_file, "--storage", "s1,s2", "--pairs", "u1-u2", "--demands", str(demands),
            "--weights", "1", "--delta", "2", "--export-lp", str(lp), "--out", str(sched)]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "status Optimal" in out
    assert lp.read_text().rstrip().endswith("End")
    assert sched.read_text().startswith("kind,pair,path,interval,age,value")
    # without storage the spike cannot be met; that is a result, not a failure
    assert main(args[:3] + args[5:]) == 0
    assert "status Infeasible" in capsys.readouterr().out


@pytest.mark.parametrize("objective", ["max-wegr", "min-delay"])
def test_solve_objectives(line_file, objective, capsys):
    args = ["solve", "--topology", line_file, "--storage-count", "2", "--pairs", "u1-u2", "--intervals", "3",
            "--spike-mean", "50", "--spikes", "1", "--objective", objective, "--lifetime", "2",
            "--policy", "OldestFirst"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "objective" in out and "replay OldestFirst" in out


def test_dump_overlay(line_file, capsys):
    assert main(["dump-overlay", "--topology", line_file, "--storage", "s1,s2", "--pairs", "u1-u2"]) == 0
    out = capsys.readouterr().out
    assert "vlink 0 s1 s2" in out and "expanded=" in out


def test_sweep(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    out = tmp_path / "res"
    args = ["sweep", "--topology", "pa:8:2", "--workloads", "2", "--n-intervals", "2", "--storage-counts", "0,2",
            "--demand-scale", "0.1", "--write-config", str(cfg), "--out", str(out)]
    assert main(args) == 0
    assert sorted(os.listdir(out)) == ["feasibility_F0.8_S0.csv", "feasibility_F0.8_S2.csv", "feasibility_summary.csv"]
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    for name in os.listdir(out):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_sweep_with_failed_runs_exits_2(tmp_path):
    args = ["sweep", "--topology", "pa:6:2", "--workloads", "1", "--n-intervals", "2", "--storage-counts", "0,40",
            "--out", str(tmp_path / "r")]
    assert main(args) == 2


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["gen-topology", "pa"],
        ["gen-topology", "xx", "5", "1"],
        ["solve", "--objective", "fastest"],
        ["solve", "--topology", "/no/such/file"],
        ["solve", "--topology", "pa:6:2", "--pairs", "0-99"],
        ["sweep", "--config", "/no/such/config"],
        ["sweep", "--thresholds", "0.1"],
        ["gen-topology", "pa", "3", "3"],
    ],
)
def test_usage_errors_exit_1(argv):
    assert main(argv) == 1


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "sweep" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qon.cli", "purify-table", "--targets", "0.9"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("F,F_target")
