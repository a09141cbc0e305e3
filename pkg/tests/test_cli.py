import numpy as np
import pytest

from peergrid.cli import main
from peergrid.fileio import read_csv
from peergrid.model import load_network

DATA = __import__("pathlib").Path(__file__).resolve().parents[1] / "data" / "i2"
I2 = ["--network", str(DATA / "network.csv"), "--users", str(DATA / "users.csv")]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def values(text, key):
    for line in text.splitlines():
        if line.startswith(key + " = "):
            return [float(v) for v in line.split(" = ")[1].split()]
    raise KeyError(key)


def test_topology_ring(capsys, tmp_path):
    code, out, _ = run(capsys, "topology", "--kind", "ring", "--n", "4", "--out", str(tmp_path / "r.csv"))
    assert code == 0
    net = load_network(tmp_path / "r.csv")
    np.testing.assert_allclose(net.weights.sum(axis=1), 1.0)
    assert (tmp_path / "r.csv.manifest").exists()


def test_topology_stdout_and_errors(capsys):
    code, out, _ = run(capsys, "topology", "--kind", "fully_connected", "--n", "2")
    assert code == 0 and out == "0,1\n1,0\n"
    code, _, err = run(capsys, "topology", "--kind", "star", "--n", "2")
    assert code == 2 and "InvalidSize" in err


def test_solve(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", *I2, "--price", "2", "--csv", str(tmp_path / "x.csv"))
    assert code == 0
    _, rows = read_csv(tmp_path / "x.csv")
    assert [r["consumption"] for r in rows] == [3.2, 3.2]
    assert "fixed_point_residual" in out
    code, out, _ = run(capsys, "solve", *I2, "--price", "2", "--gamma", "0")
    assert "1,2,4,16" in out


def test_solve_assumption_exit(capsys):
    code, _, err = run(capsys, "solve", *I2, "--price", "10")
    assert code == 3 and "user 1" in err


def test_solve_price_file(capsys, tmp_path):
    (tmp_path / "p.csv").write_text("2\n3\n")
    code, out, _ = run(capsys, "solve", *I2, "--prices", str(tmp_path / "p.csv"))
    assert code == 0 and "2,3," in out


def test_price_ppd(capsys):
    code, out, _ = run(capsys, "price", *I2, "--scheme", "ppd")
    assert code == 0
    np.testing.assert_allclose(values(out, "prices"), 65 / 9)
    np.testing.assert_allclose(values(out, "profit"), 100 / 9)
    for term in ("constant a/2", "cost term", "influence discount", "influenced surcharge"):
        assert term in out


def test_price_social(capsys):
    code, out, _ = run(capsys, "price", *I2, "--scheme", "social")
    np.testing.assert_allclose(values(out, "social_optimum"), 5 / 3)
    np.testing.assert_allclose(values(out, "subsidies"), 25 / 12)


def test_price_other_schemes(capsys):
    _, out, _ = run(capsys, "price", *I2, "--scheme", "uniform")
    np.testing.assert_allclose(values(out, "price"), 65 / 9)
    _, out, _ = run(capsys, "price", *I2, "--scheme", "baseline")
    np.testing.assert_allclose(values(out, "price"), 7.5)
    _, out, _ = run(capsys, "price", *I2, "--scheme", "incomplete", "--a-low", "10", "--a-high", "10", "--b-low", "1", "--b-high", "1")
    np.testing.assert_allclose(values(out, "price_lower_bound"), 65 / 9)


def test_price_incomplete_on_star(capsys, tmp_path):
    run(capsys, "topology", "--kind", "star", "--n", "3", "--out", str(tmp_path / "s.csv"))
    (tmp_path / "u.csv").write_text("a,b,gamma,c\n10,1,0.5,2\n10,1,0.5,2\n10,1,0.5,2\n")
    code, _, err = run(capsys, "price", "--network", str(tmp_path / "s.csv"), "--users", str(tmp_path / "u.csv"), "--scheme", "incomplete")
    assert code == 4


def test_select(capsys):
    code, out, _ = run(capsys, "select", *I2, "--price", "7.5", "--m", "1")
    assert code == 0
    assert "exact: users = 1," in out and "S_m = 100" in out
    _, out, _ = run(capsys, "select", *I2, "--price", "7.5", "--m", "0")
    assert "users = (none)" in out and "S_m = n/a" in out
    _, out, _ = run(capsys, "select", *I2, "--price", "7.5", "--m", "2", "--method", "exact")
    assert "users = 1,2" in out and "S_m" not in out


def test_select_cap(capsys):
    code, _, _ = run(capsys, "select", *I2, "--price", "7.5", "--m", "1", "--cap", "1")
    assert code == 5


def test_experiment_roundtrip(capsys, tmp_path, monkeypatch):
    (tmp_path / "s.cfg").write_text("study = selection\nn = 4\niterations = 4\n")
    monkeypatch.setenv("PEERGRID_THREADS", "2")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["experiment", "--study", "selection", "--config", str(tmp_path / "s.cfg"), "--out", str(out1)]) == 0
    assert main(["experiment", "--study", "selection", "--config", str(tmp_path / "s.cfg"), "--out", str(out2), "--threads", "1"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    _, rows = read_csv(out1)
    assert rows[0]["m"] == 0 and rows[0]["S_m"] is None
    assert out1.read_text().splitlines()[1].split(",")[5] == ""


def test_experiment_config_error(capsys, tmp_path):
    (tmp_path / "bad.cfg").write_text("iterations = 0\n")
    code, _, err = run(capsys, "experiment", "--study", "pricing", "--config", str(tmp_path / "bad.cfg"))
    assert code == 6 and "iterations" in err


def test_boomerang_command(capsys):
    code, out, _ = run(capsys, "boomerang", *I2, "--price", "2")
    assert code == 0
    np.testing.assert_allclose(values(out, "gradient"), [-2, -2])


def test_bad_arguments_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2
