import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from locmem.cli import main, parse_curve, parse_d_grid, read_config
from locmem.errors import ConfigurationError


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def series(tmp_path, capsys):
    path = tmp_path / "x.csv"
    code, _, _ = run(["simulate", "-T", "2048", "--seed", "4", "--memory", "constant:0.2",
                      "--out", str(path)], capsys)
    assert code == 0
    return path


def test_simulate_stdout_round_trips(capsys):
    code, out, _ = run(["simulate", "-T", "64", "--seed", "1", "--truncation", "64"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "x" and len(lines) == 65
    code2, out2, _ = run(["simulate", "-T", "64", "--seed", "1", "--truncation", "64"], capsys)
    assert out == out2
    # 17 significant digits survive a parse/format cycle
    assert all(repr(float(v)) == repr(float("%.17g" % float(v))) for v in lines[1:])


def test_simulate_fgn(capsys):
    code, out, _ = run(["simulate", "--model", "tvfgn", "--hurst", "linear:0.6,0.8",
                        "-T", "128", "--truncation", "128"], capsys)
    assert code == 0 and len(out.splitlines()) == 129


def test_estimate_columns(series, capsys):
    code, out, _ = run(["estimate", str(series), "--grid", "10"], capsys)
    assert code == 0
    r = rows(out)
    assert list(r[0]) == ["u", "d_hat", "se", "ci_lo", "ci_hi", "flags"]
    assert r[0]["flags"] == "boundary"
    assert r[8]["flags"] == "boundary"  # u = 0.9 > 1 - b/2
    d = np.array([float(x["d_hat"]) for x in r[1:8]])
    assert np.all(np.abs(d - 0.2) < 0.4)


def test_estimate_recursive_no_ci(series, capsys):
    code, out, _ = run(["estimate", str(series), "--weights", "recursive", "--no-ci",
                        "--grid", "4", "--scales", "1:3"], capsys)
    r = rows(out)
    assert code == 0 and len(r) == 4 and r[-1]["se"] == "nan"


def test_scalogram_and_filter_dump(series, tmp_path, capsys):
    dump = tmp_path / "filters.csv"
    code, out, _ = run(["scalogram", str(series), "--scales", "1..3", "--grid", "4",
                        "--dump-filters", str(dump)], capsys)
    assert code == 0
    r = rows(out)
    assert list(r[0]) == ["u", "j", "sigma2"]
    assert {x["j"] for x in r} == {"1", "2", "3"}
    taps = rows(dump.read_text())
    assert sum(1 for t in taps if t["j"] == "3") == (2**3 - 1) * 3 + 1


def test_constant_series_is_flagged_not_fatal(tmp_path, capsys):
    path = tmp_path / "c.csv"
    path.write_text("\n".join(["2.5"] * 1000) + "\n")
    code, out, err = run(["estimate", str(path), "--grid", "5"], capsys)
    assert code == 0
    assert "zero scalogram" in err
    assert [x["flags"] for x in rows(out)][:4] == ["zero_scalogram"] * 4


@pytest.mark.parametrize("content,code", [("1\n2\nabc\n", 3), ("1\nnan\n", 3), ("", 3)])
def test_data_errors(tmp_path, capsys, content, code):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    got, _, err = run(["estimate", str(path)], capsys)
    assert got == code and err.startswith("error:")


def test_configuration_errors(series, capsys):
    assert run(["estimate", str(series), "--scales", "9:4"], capsys)[0] == 2
    assert run(["estimate", str(series), "--bandwidth", "0.0001"], capsys)[0] == 2
    assert run(["estimate", str(series), "--kernel", "gauss"], capsys)[0] == 2
    assert run(["estimate", str(series), "--scales", "two"], capsys)[0] == 2
    assert run(["simulate", "--memory", "constant:0.6"], capsys)[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["estimate"])
    assert info.value.code == 2


def test_config_file(series, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nweights.kind = recursive\nweights.bandwidth = 0.3\ngrid = 4\n")
    code, out, _ = run(["--config", str(cfg), "estimate", str(series), "--no-ci"], capsys)
    assert code == 0 and len(rows(out)) == 4
    ref = run(["estimate", str(series), "--no-ci", "--weights", "recursive",
               "--bandwidth", "0.3", "--grid", "4"], capsys)[1]
    assert out == ref
    # flags override the file
    out2 = run(["--config", str(cfg), "estimate", str(series), "--no-ci", "--grid", "5"],
               capsys)[1]
    assert len(rows(out2)) == 5
    assert read_config(cfg)["weights"] == "recursive"
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign\n")
    assert run(["--config", str(bad), "estimate", str(series)], capsys)[0] == 2


def test_asymptotics_csv_and_json(capsys):
    code, out, _ = run(["asymptotics", "--d", "0,0.2", "--ell", "1"], capsys)
    r = rows(out)
    assert code == 0 and len(r) == 2
    assert float(r[0]["K"]) == pytest.approx(2 * np.pi, rel=1e-9)
    code, out, _ = run(["asymptotics", "--d", "0:0.2:0.1", "--format", "json",
                        "--weights", "recursive"], capsys)
    payload = json.loads(out)
    assert [p["d"] for p in payload] == pytest.approx([0.0, 0.1, 0.2])
    assert np.array(payload[0]["Sigma"]).shape == (3, 3)


def test_advise(capsys):
    code, out, _ = run(["advise", "-T", "4096"], capsys)
    r = {x["key"]: x["value"] for x in rows(out)}
    assert code == 0 and r["L"] == "2"
    assert run(["advise", "-T", "32"], capsys)[0] == 2


def test_parsers():
    assert parse_curve("0.3")(0.7) == pytest.approx(0.3)
    assert parse_curve("cosine")(1.0) == pytest.approx(1 / 3)
    assert parse_curve("piecewise:0.1,0.2@0.5")(0.75) == pytest.approx(0.2)
    assert parse_d_grid("0:0.3:0.1") == pytest.approx((0.0, 0.1, 0.2, 0.3))
    with pytest.raises(ConfigurationError):
        parse_curve("wiggly:3")


def test_reproduce_is_deterministic(tmp_path, capsys, monkeypatch):
    args = ["reproduce-sec51", "--seeds", "2", "-T", "1024", "--grid", "20"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(args + ["--out-dir", str(a)], capsys)[0] == 0
    monkeypatch.setenv("LOCMEM_THREADS", "2")
    assert run(args + ["--out-dir", str(b)], capsys)[0] == 0
    for name in ("curves.csv", "scalograms.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = rows((a / "summary.csv").read_text())
    assert {(s["weights"], s["L"]) for s in summary} == {
        (w, str(L)) for w in ("kernel", "recursive") for L in (1, 2, 3)}


def test_console_script_entry_point(tmp_path):
    env = dict(os.environ, LOCMEM_DISABLE_NUMBA="1")
    proc = subprocess.run([sys.executable, "-m", "locmem.cli", "advise", "-T", "4096"],
                          capture_output=True, text=True, env=env, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("key,value")
