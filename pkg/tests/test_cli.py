import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from xicavity.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_VALIDATION,
    OUTPUT_DIR_ENV,
    fmt,
    main,
)
from xicavity.observables import CSV_HEADER


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def column(rows, name):
    k = rows[0].index(name)
    return np.array([float(r[k]) for r in rows[1:]])


@pytest.mark.parametrize(
    "x,text",
    [
        (0.0, "0.00000000000"),
        (1.0, "1.00000000000"),
        (0.25, "0.250000000000"),
        (-2.5e-7, "-0.000000250000000000"),
        (1234.5678, "1234.56780000"),
        (2.0 / 3.0, "0.666666666667"),
        (-1e12, "-1000000000000"),
    ],
)
def test_fmt_fixed_significant_digits(x, text):
    assert fmt(x) == text
    assert float(fmt(x)) == pytest.approx(x, rel=1e-11)


def test_default_simulate(tmp_path):
    out = tmp_path / "obs.csv"
    assert main(["simulate", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1002
    first = [float(x) for x in rows[1]]
    assert first[0] == 0.0
    assert first[5] == pytest.approx(10.0, abs=1e-9)
    np.testing.assert_allclose(first[1:5] + first[6:], 0.0, atol=1e-8)
    assert float(rows[-1][0]) == pytest.approx(25.0)


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "--f", "harmonious", "--t-max", "5", "--steps", "50", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_harmonious_rows_repeat_after_one_period(tmp_path):
    out = tmp_path / "h.csv"
    period = math.pi * math.sqrt(2)
    main(["simulate", "--f", "harmonious", "--t-max", str(2 * period), "--steps", "200", "--out", str(out)])
    rows = read_csv(out)
    for name in ("S_atoms", "mandel_Q", "mean_n", "S_x"):
        y = column(rows, name)
        np.testing.assert_allclose(y[:100], y[100:200], atol=1e-9)


def test_ode_solver_matches_eigen(tmp_path):
    a, b = tmp_path / "e.csv", tmp_path / "o.csv"
    common = ["simulate", "--t-max", "3", "--steps", "30"]
    main(common + ["--out", str(a)])
    main(common + ["--solver", "ode", "--out", str(b)])
    ra, rb = read_csv(a), read_csv(b)
    for name in CSV_HEADER:
        np.testing.assert_allclose(column(ra, name), column(rb, name), atol=1e-7)


def test_detuned_run_requires_ode(tmp_path, capsys):
    out = tmp_path / "d.csv"
    args = ["simulate", "--delta1", "0.5", "--t-max", "2", "--steps", "10", "--out", str(out)]
    assert main(args) == EXIT_CONFIG
    assert main(args + ["--solver", "ode"]) == EXIT_OK
    assert len(read_csv(out)) == 12


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"f": "harmonious", "t_max": 4.0, "steps": 8, "alpha-sq": 4.0}))
    out = tmp_path / "c.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 10
    assert float(rows[1][5]) == pytest.approx(4.0, abs=1e-9)
    assert main(["simulate", "--config", str(cfg), "--steps", "4", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 6


@pytest.mark.parametrize(
    "content",
    ["{not json", json.dumps({"colour": "red"}), json.dumps([1, 2]), json.dumps({"f": "cubic"})],
)
def test_bad_config_file(tmp_path, content):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


@pytest.mark.parametrize(
    "args",
    [
        ["--alpha-sq", "-1"],
        ["--steps", "0"],
        ["--tail-eps", "0.5"],
        ["--f", "trapped-ion", "--eta", "-0.1"],
    ],
)
def test_invalid_options(tmp_path, args):
    assert main(["simulate", "--out", str(tmp_path / "x.csv")] + args) == EXIT_CONFIG


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "x.csv")]) == EXIT_IO


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "afile"
    blocker.write_text("")
    assert main(["simulate", "--t-max", "1", "--steps", "2", "--out", str(blocker / "x.csv")]) == EXIT_IO


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "runs"))
    assert main(["simulate", "--t-max", "1", "--steps", "2", "--out", "o.csv"]) == 0
    assert (tmp_path / "runs" / "o.csv").exists()


def test_dump_rho_and_amplitudes(tmp_path):
    out = tmp_path / "o.csv"
    amps = tmp_path / "amps.csv"
    args = ["simulate", "--t-max", "2", "--steps", "4", "--out", str(out), "--dump-rho", "1.0", "--amplitudes", str(amps)]
    assert main(args) == 0
    rho_rows = read_csv(tmp_path / "o_rho.csv")
    assert len(rho_rows) == 9 and all(len(r) == 18 for r in rho_rows)
    rho = np.array([[float(r[2 * j]) + 1j * float(r[2 * j + 1]) for j in range(9)] for r in rho_rows])
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-11)
    a = read_csv(amps)
    assert a[0][:4] == ["t", "n", "re_c1", "im_c1"] and len(a[0]) == 14
    assert len(a) == 1 + 5 * 44


def test_errata_report(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["simulate", "--t-max", "5", "--steps", "10", "--out", str(out), "--errata", "report"]) == 0
    rows = read_csv(tmp_path / "o_errata.csv")
    assert rows[0][1] == "printed_dC1" and rows[0][-1] == "corrected_dC6"
    data = np.array(rows[1:], dtype=float)
    assert data[:, 7:].max() < 1e-10
    assert data[:, 1:7].max() > 1e-2
    np.testing.assert_allclose(data[0, 1:], 0.0, atol=1e-12)


def spectra(args, capsys):
    assert main(["spectra"] + args) == 0
    return list(csv.reader(io.StringIO(capsys.readouterr().out)))


def test_spectra_harmonious(capsys):
    rows = spectra(["--f", "harmonious", "--n-max", "5"], capsys)
    assert len(rows) == 7
    for r in rows[1:]:
        d = dict(zip(rows[0], r))
        assert float(d["beta1"]) == pytest.approx(2 * math.sqrt(2), abs=1e-11)
        assert float(d["beta2"]) == pytest.approx(math.sqrt(2), abs=1e-11)


def test_spectra_constant_values(capsys):
    rows = spectra(["--n-min", "2", "--n-max", "2"], capsys)
    d = dict(zip(rows[0], rows[1]))
    assert d["n"] == "2"
    v2 = {j: 2 + j for j in range(1, 5)}  # V_j^2 = n + j for constant coupling
    x2 = 6 * v2[1] * v2[3] + 4 * v2[1] * v2[4] + 6 * v2[2] * v2[4]
    assert x2 == 306
    assert float(d["x2"]) == pytest.approx(x2, rel=1e-11)
    assert float(d["x3_printed"]) - float(d["x3"]) == pytest.approx(3 * 5.0, rel=1e-10)


def test_spectra_bad_range():
    assert main(["spectra", "--n-min", "5", "--n-max", "2"]) == EXIT_CONFIG


def test_validate_short_run_passes(capsys):
    assert main(["validate", "--t-max", "2", "--steps", "40"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "0 failed" in out


def test_validate_reports_loose_integrator(capsys):
    assert main(["validate", "--t-max", "2", "--steps", "40", "--ode-tol", "1e-2"]) == EXIT_VALIDATION
    lines = capsys.readouterr().out.splitlines()
    assert any(l.startswith("FAIL") and "norm conservation, ode path" in l for l in lines)


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "xicavity", "simulate", "--t-max", "1", "--steps", "2", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(read_csv(out)) == 4
