import csv
import filecmp
import xml.dom.minidom

import numpy as np
import pytest

from ellq import acceptance
from ellq.certificate import certify
from ellq.cli import main, read_config, resolve
from ellq.errors import ConfigError
from ellq.experiments import case_systems


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_relax_zero_time(tmp_path):
    out = tmp_path / "deep" / "nested"
    assert main(["relax", "--n", "4", "--t-max", "0", "--out", str(out)]) == 0
    data = rows(out / "trajectory.csv")
    assert len(data) == 1
    assert float(data[0]["p_res"]) == 1.0
    xml.dom.minidom.parse(str(out / "relax.svg"))


def test_relax_rel_err_under_tail_envelope(tmp_path):
    assert main(["relax", "--n", "8", "--rhs", "III", "--t-max", "30", "--out", str(tmp_path)]) == 0
    c_tail = certify(case_systems(8, ["III"])["III"]).C_tail
    data = rows(tmp_path / "trajectory.csv")
    assert list(data[0]) == ["t", "norm_x", "norm_w", "p_res", "norm_rA", "rel_err"]
    late = [r for r in data if float(r["t"]) >= 1.0]
    for r in late:
        assert float(r["rel_err"]) <= c_tail * float(r["norm_w"]) / float(r["norm_x"])
    assert float(data[-1]["rel_err"]) < 1e-4


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn = 4   # small\nt-max = 2.5\nseed=9\n")
    merged = resolve("relax", {"n": "6", "seed": None}, cfg)
    assert merged["n"] == "6"
    assert merged["t_max"] == 2.5 and merged["seed"] == 9
    assert read_config(cfg) == {"n": "4", "t_max": 2.5, "seed": 9}


@pytest.mark.parametrize("text", ["bogus = 1\n", "seed = abc\n", "just words\n"])
def test_bad_config_exit_code(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert main(["relax", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    with pytest.raises(ConfigError):
        read_config(cfg)


@pytest.mark.parametrize("argv", [
    ["relax", "--n", "1"],
    ["relax", "--rhs", "V"],
    ["relax", "--n", "4", "--theta", "3"],
    ["relax", "--config", "/nonexistent/file.cfg"],
    ["stop", "--n", "4", "--eps", "2"],
    ["frobnicate"],
    ["relax", "--n", "abc"],
])
def test_configuration_errors(tmp_path, argv):
    assert main([*argv, "--out", str(tmp_path)]) == 2


def test_stop_success_and_reproducible(tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["stop", "--n", "8", "--rhs", "I,III", "--seed", "3", "--out", str(out)]) == 0
        runs.append(out)
    res = rows(runs[0] / "results.csv")
    assert [r["case"] for r in res] == ["I", "III"]
    assert all(float(r["final_rel_err"]) <= 1e-3 for r in res)
    for name in ("results.csv", "checkpoints_I.csv", "checkpoints_III.csv"):
        assert filecmp.cmp(runs[0] / name, runs[1] / name, shallow=False)
    xml.dom.minidom.parse(str(runs[0] / "checkpoints_I.svg"))


def test_stop_no_entry(tmp_path):
    cfg = tmp_path / "nu.cfg"
    cfg.write_text("nu = 1e-9\nk_max = 3\n")
    assert main(["stop", "--n", "4", "--shots", "1", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    log = rows(tmp_path / "checkpoints_I.csv")
    assert len(log) == 3
    assert all(r["accepted"] == "0" for r in log)
    assert all(float(r["delta"]) >= 1.0 for r in log)
    assert rows(tmp_path / "results.csv") == []


def test_sweep_empty_case_list(tmp_path):
    assert main(["sweep", "--n", "4", "--rhs", "", "--out", str(tmp_path)]) == 0
    expected = {
        "degree_sweep.csv": "case,degree,state_err",
        "degree_summary.csv": "case,crossing_degree,d_wc",
        "time_sweep.csv": "case,t,rel_err",
        "time_summary.csv": "case,crossing_time,T_wc",
    }
    for name, header in expected.items():
        assert (tmp_path / name).read_text() == header + "\n"


def test_sweep_small_mesh(tmp_path):
    assert main(["sweep", "--n", "8", "--t-max", "25", "--out", str(tmp_path)]) == 0
    deg = {r["case"]: r for r in rows(tmp_path / "degree_summary.csv")}
    tim = {r["case"]: r for r in rows(tmp_path / "time_summary.csv")}
    assert set(deg) == set(tim) == {"I", "II", "III", "IV"}
    for r in deg.values():
        assert int(r["crossing_degree"]) <= int(r["d_wc"])
    for r in tim.values():
        assert float(r["crossing_time"]) <= float(r["T_wc"])
    assert int(deg["I"]["crossing_degree"]) <= int(deg["III"]["crossing_degree"])
    assert float(tim["I"]["crossing_time"]) <= float(tim["III"]["crossing_time"])
    for name in ("degree_sweep.svg", "time_sweep.svg"):
        text = (tmp_path / name).read_text()
        xml.dom.minidom.parseString(text)
        assert 'stroke-dasharray="6,4"' in text and 'stroke-dasharray="8,3,2,3"' in text


def test_spectral_dump(tmp_path):
    assert main(["spectral", "--n", "4,8", "--dump", "--out", str(tmp_path)]) == 0
    spectral = rows(tmp_path / "spectral.csv")
    assert [r["n"] for r in spectral] == ["4", "8"]
    cert = rows(tmp_path / "certificate.csv")
    assert all(float(r["c_hat"]) >= float(r["c_st"]) for r in cert)
    for name in ("G.mtx", "b.txt", "mesh_nodes.csv", "mesh_triangles.csv"):
        assert (tmp_path / name).exists()
    assert len(np.loadtxt(tmp_path / "b.txt")) == 49


def _gram_only(monkeypatch):
    monkeypatch.setattr(acceptance, "CRITERIA", (acceptance.criterion_2,))


def test_report_detects_corrupted_dump(tmp_path, monkeypatch, capsys):
    _gram_only(monkeypatch)
    assert main(["spectral", "--n", "16", "--dump", "--out", str(tmp_path)]) == 0
    assert main(["report", "--g-dump", str(tmp_path / "G.mtx"), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "G.mtx").read_text().splitlines()
    for k in range(2, len(lines)):
        i, j, v = lines[k].split()
        lines[k] = f"{i} {j} {float(v) * 1.001!r}"
    (tmp_path / "G.mtx").write_text("\n".join(lines) + "\n")
    assert main(["report", "--g-dump", str(tmp_path / "G.mtx"), "--out", str(tmp_path / "r")]) == 1
    assert "[FAIL]  2 Gram identity" in capsys.readouterr().out
    assert rows(tmp_path / "r" / "acceptance.csv")[0]["passed"] == "0"


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.startswith("ellq ")
