import json

import pytest

from gossip_sim.cli import main
from gossip_sim.graph import load_graph


def write_config(path, **over):
    doc = {
        "schema_version": 1,
        "graph": {"type": "cycle", "n": 10},
        "protocols": [{"kind": "standard"}, {"kind": "binary", "schedule": {"type": "constant", "lambda": 0.01}}],
        "iterations": 100,
        "seeds": {"count": 3},
        "output_dir": "out",
    }
    doc.update(over)
    path.write_text(json.dumps(doc))
    return path


def parse_kv(text):
    return dict(line.split(" ", 1) for line in text.strip().splitlines())


def test_graph_cycle(tmp_path, capsys):
    out = tmp_path / "c10.txt"
    assert main(["graph", "--type", "cycle", "--n", "10", "--out", str(out)]) == 0
    kv = parse_kv(capsys.readouterr().out)
    assert kv["n"] == "10" and kv["m"] == "10" and kv["d_min"] == "2"
    assert float(kv["alpha"]) == pytest.approx(0.381966, abs=1e-6)
    assert float(kv["beta"]) == pytest.approx(26.1803, abs=1e-4)
    assert load_graph(out).m == 10


def test_graph_rgg_default_radius(tmp_path, capsys):
    assert main(["graph", "--type", "rgg", "--n", "100", "--seed", "7", "--out", str(tmp_path / "g.json")]) == 0
    kv = parse_kv(capsys.readouterr().out)
    assert float(kv["r"]) == pytest.approx(0.21460, abs=5e-6)
    assert load_graph(tmp_path / "g.json").coords is not None


@pytest.mark.parametrize(
    "argv",
    [
        ["graph", "--type", "cycle", "--n", "2"],
        ["graph", "--type", "rgg", "--n", "5", "--r", "1e-9"],
        ["graph", "--type", "star", "--n", "5"],
        ["graph", "--type", "cycle"],
        [],
    ],
)
def test_graph_invalid(argv, capsys):
    assert main(argv) == 2


def test_run_and_rerun_identical(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.json")
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "b")]) == 0
    for name in ("trace_0_standard.csv", "trace_1_binary.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_output_dir_from_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.json")
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "out" / "summary.json").exists()


def test_run_unknown_key_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.json", colour="red")
    assert main(["run", str(cfg)]) == 2
    assert "unknown keys" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_run_missing_config_exit_3(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == 3


def test_run_unwritable_output_exit_3(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    cfg = write_config(tmp_path / "exp.json")
    assert main(["run", str(cfg), "--output-dir", str(blocker / "sub")]) == 3
    assert not (blocker.parent / "summary.json").exists()


def test_bounds(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "exp.json",
        graph={"type": "edges", "n": 2, "edges": [[0, 1]]},
        initial_values={"type": "explicit", "values": [0.0, 1.0]},
        protocols=[{"kind": "standard"}, {"kind": "epsgap", "eps": 0.1}],
        bound_iterations=[0, 100, 1000],
    )
    out = tmp_path / "b.csv"
    assert main(["bounds", str(cfg), "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "iter,0_standard:dual_subopt,1_epsgap:delta_k"
    assert lines[1] == "0,0.25,"
    assert lines[2].split(",")[2] == "1"
    assert lines[3].split(",")[2] == "0.10000000000000001"
    assert out.read_text().splitlines() == lines
