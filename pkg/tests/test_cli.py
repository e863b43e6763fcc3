import csv
import json

import pytest

from faber_relu.cli import main
from faber_relu.relunet import ReluNetwork


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_grid_levels(capsys):
    code, out, err = run(capsys, "grid", "--dim", "2", "--beta", "2", "--m", "3")
    assert code == 0
    assert "terms=33" in err
    assert len(out.strip().splitlines()) == 8


def test_grid_points_one_dimensional(capsys):
    code, out, _ = run(capsys, "grid", "--dim", "1", "--beta", "2", "--m", "1", "--points")
    assert code == 0
    assert out.split() == ["0/2^0", "1/2^2", "1/2^1", "3/2^2", "1/2^0"]


def test_grid_to_file(tmp_path, capsys):
    path = tmp_path / "levels.txt"
    code, out, _ = run(capsys, "grid", "--dim", "3", "--m", "2", "--kind", "smolyak", "--out", str(path))
    assert code == 0
    assert "levels=10" in out
    assert len(path.read_text().strip().splitlines()) == 10


def test_sample(tmp_path, capsys):
    path = tmp_path / "R.txt"
    code, out, _ = run(capsys, "sample", "--dim", "2", "--m", "3", "--out", str(path))
    assert code == 0
    assert out.startswith("terms=33 ")
    assert path.stat().st_size > 0


def test_compile_and_measure(tmp_path, capsys):
    net_path = tmp_path / "net.json"
    code, out, _ = run(capsys, "compile", "--dim", "2", "--eps", "0.2", "--out", str(net_path))
    assert code == 0
    fields = dict(item.split("=") for item in out.split())
    assert fields["m"] == "5"
    net = ReluNetwork.from_text(net_path.read_text())
    assert net.stats().W == int(fields["W"])

    code, out, _ = run(capsys, "measure", "--lhs", "func:poly_tent", "--rhs", f"net:{net_path}",
                       "--dim", "2", "--n", "64")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "lhs,rhs,p,scheme,value,std_error,runtime_ms"
    value = float(row.split(",")[4])
    assert 0 < value <= 0.2


def test_compile_narrow_is_narrower(capsys):
    _, wide, _ = run(capsys, "compile", "--dim", "2", "--eps", "0.2")
    _, narrow, _ = run(capsys, "compile", "--dim", "2", "--eps", "0.2", "--narrow")
    nw = lambda text: int(dict(i.split("=") for i in text.split())["Nw"])
    assert nw(narrow) < nw(wide)


def test_compile_eps_too_large(capsys):
    code, _, err = run(capsys, "compile", "--dim", "2", "--eps", "0.3")
    assert code == 2
    assert "error" in err


def test_bad_beta_is_parameter_error(capsys):
    code, _, _ = run(capsys, "sample", "--dim", "2", "--alpha", "2", "--beta", "2", "--m", "2")
    assert code == 2


def test_unknown_corpus_id(capsys):
    code, _, err = run(capsys, "sample", "--dim", "2", "--m", "2", "--func", "nope")
    assert code == 2
    assert "unknown corpus id" in err


def test_corpus_list(capsys):
    code, out, _ = run(capsys, "corpus", "list")
    rows = list(csv.reader(out.strip().splitlines()))
    assert code == 0
    assert rows[0] == ["id", "d_range", "alpha_range", "certification"]
    assert {r[0] for r in rows[1:]} >= {"poly_tent", "sine_product", "bspline_bump", "zero"}


def test_verify_fast_criteria(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--criteria", "4,10", "--out", str(tmp_path))
    assert code == 0
    assert "PASS criterion 4" in out and "PASS criterion 10" in out
    lines = (tmp_path / "verify.csv").read_text().splitlines()
    assert lines[0] == "criterion,cell,measured,bound,status,note"
    assert all(",PASS," in line or ",SKIP," in line for line in lines[1:])


def test_sweep_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dims": [2], "alphas": [2.0], "ps": [2.0], "sweep_eps": [0.3, 0.2, 0.1]}))
    code, _, _ = run(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert [r["status"] for r in sorted(rows, key=lambda r: -float(r["eps"]))] == ["SKIP", "OK", "OK"]
    fits = (tmp_path / "fits.csv").read_text().splitlines()
    assert fits[0].startswith("d,alpha,beta,p,slope_log2W")
    assert len(fits) == 2


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
