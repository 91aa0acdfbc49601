import json
import math

import pytest

from mginf import busy_analytics as ba
from mginf import service_law as sl
from mginf.cli import SWEEP_HEADER, RunConfig, main

BASE = ["--lambda", "1", "--rho", "1", "--p", "0", "--beta", "0"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", *BASE)
    assert code == 0
    report = json.loads(out)
    assert report["all_pass"]
    assert {"name", "status", "max_error"} <= set(report["checks"][0])
    assert report["derived"]["beta_max"] == pytest.approx(1 / (math.e - 1), rel=1e-15)


def test_validate_grid(capsys):
    code, out, _ = run(capsys, "validate", "--grid")
    assert code == 0
    assert json.loads(out)["n_points"] == 500


def test_validate_beta_above_max(capsys):
    code, out, err = run(capsys, "validate", "--lambda", "1", "--rho", "1", "--p", "0", "--beta", "0.6")
    assert code == 2
    assert out == ""
    assert "beta exceeds beta_max=0.581977" in err


def test_bad_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--rho", "abc"])
    assert exc.value.code == 2


def test_eval_times(capsys):
    code, out, _ = run(capsys, "eval", *BASE, "--t", "0,1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,cdf,pdf,survival"
    row0 = [float(v) for v in lines[1].split(",")]
    row1 = [float(v) for v in lines[2].split(",")]
    assert row0[1] == pytest.approx(math.exp(-1), rel=1e-14)
    assert row1[1] == pytest.approx(0.6126998, abs=5e-7)
    assert row1[1] + row1[3] == pytest.approx(1.0, rel=1e-15)


def test_eval_quantile(capsys):
    code, out, _ = run(capsys, "eval", *BASE, "--u", "0.9")
    lines = out.splitlines()
    assert lines[0] == "u,quantile"
    assert float(lines[1].split(",")[1]) == pytest.approx(2.7385494, abs=5e-7)
    # repr floats carry full precision
    assert len(lines[1].split(",")[1].replace(".", "")) >= 12


def test_eval_needs_input(capsys):
    code, _, err = run(capsys, "eval", *BASE)
    assert code == 2 and "--t" in err


@pytest.mark.parametrize("method", ["series", "grid", "quadrature", "bounds"])
def test_moments_mean(capsys, method):
    code, out, _ = run(capsys, "moments", "--lambda", "1", "--rho", "0.5", "--p", "0", "--beta", "0",
                       "--n", "1", "--method", method, "--m", "65536")
    assert code == 0
    report = json.loads(out)
    tol = {"series": 1e-9, "grid": 1e-4, "quadrature": 1e-9, "bounds": 1.0}[method]
    assert report["value"] == pytest.approx(0.5, rel=tol)
    assert set(report) >= {"n", "method", "value", "error_bound", "truncation", "bounds", "paper_truncation"}


def test_moments_series_second(capsys):
    code, out, _ = run(capsys, "moments", "--lambda", "1", "--rho", "0.5", "--p", "0", "--beta", "0",
                       "--n", "2", "--method", "series", "--eps", "1e-10")
    report = json.loads(out)
    assert report["value"] == pytest.approx(1.13193, abs=5e-6)
    assert report["error_bound"] <= 1e-8
    assert report["bounds"]["upper"] == pytest.approx(1.297443, abs=5e-7)
    assert report["paper_truncation"]["M_b_status"] == "paper-form, unverified"


def test_moments_grid_error_bound_is_null(capsys):
    _, out, _ = run(capsys, "moments", *BASE, "--method", "grid", "--m", "64")
    assert json.loads(out)["error_bound"] is None


def test_moments_series_rho_too_large(capsys):
    code, _, err = run(capsys, "moments", *BASE, "--method", "series")
    assert code == 2
    assert "rho < log 2" in err


def test_busy_json_and_csv(capsys, tmp_path):
    path = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "busy", *BASE, "--t-max", "4", "--points", "3", "--csv", str(path))
    assert code == 0
    r = json.loads(out)
    assert r["pi"] == pytest.approx(0.537883, abs=5e-7)
    assert r["qi"] == pytest.approx(1.7488465, abs=5e-7)
    assert r["pi_cycle"] == pytest.approx(0.2689414, abs=5e-7)
    assert r["qi_cycle"] == pytest.approx(1.156518, abs=5e-7)
    assert r["conjectured"]["mu"] == pytest.approx(math.exp(-1), rel=1e-14)
    assert r["slope_ok"] is True
    lines = path.read_text().splitlines()
    assert lines[0] == "t,r_paper,r_oracle_ordinary,r_oracle_delayed"
    t2 = [float(v) for v in lines[2].split(",")]
    assert t2[0] == 2.0
    assert t2[1] == pytest.approx(1.103638, abs=5e-7)


def test_busy_degenerate(capsys):
    code, out, err = run(capsys, "busy", "--lambda", "1", "--rho", "1", "--p", "0", "--beta", "-1")
    assert code == 2
    assert json.loads(out)["pi"] == 1.0
    assert "undefined" in err


def test_malformed_config(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, out, err = run(capsys, "sweep", "--config", str(bad))
    assert code == 2 and out == ""
    assert str(bad) in err


def test_unknown_config_field(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": 1, "colour": "red"}))
    code, _, err = run(capsys, "validate", "--config", str(cfg))
    assert code == 2 and "colour" in err


def _sweep(capsys, tmp_path, sweep):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"lambda": 1.0, "sweep": sweep}))
    code, out, _ = run(capsys, "sweep", "--config", str(cfg))
    assert code == 0
    return out.splitlines()


def test_sweep_matches_busy(capsys, tmp_path):
    lines = _sweep(capsys, tmp_path, {"rho": [0.5], "p": [0.2], "beta_fraction": [0.6]})
    assert lines[0] == ",".join(SWEEP_HEADER)
    row = dict(zip(SWEEP_HEADER, lines[1].split(",")))
    _, out, _ = run(capsys, "busy", "--lambda", "1", "--rho", "0.5", "--p", "0.2", "--beta-fraction", "0.6")
    busy = json.loads(out)
    for key in ("pi", "qi", "pi_cycle", "qi_cycle", "busy_mean"):
        assert float(row[key]) == busy[key]


def test_sweep_boundary_and_empty(capsys, tmp_path):
    lines = _sweep(capsys, tmp_path, {"rho": [0.5, 2.0], "p": [0.0, 0.5], "beta_fraction": [1.0]})
    assert len(lines) == 5
    assert all(float(dict(zip(SWEEP_HEADER, ln.split(",")))["atom"]) == 0.0 for ln in lines[1:])
    lines = _sweep(capsys, tmp_path, {"rho": [], "p": [0.0], "beta_fraction": [1.0]})
    assert lines == [",".join(SWEEP_HEADER)]


def test_config_roundtrip_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": 2.0, "rho": 0.5, "p": 0.1, "beta_fraction": 0.5, "seed": 7,
                               "renewal": {"origin": "busy_start", "t_max": 3.0, "points": 4}}))
    code, out, _ = run(capsys, "busy", "--config", str(cfg), "--rho", "0.4")
    assert code == 0
    report = json.loads(out)
    restored = RunConfig.from_dict(report["config"])
    assert restored.rho == 0.4 and restored.lam == 2.0 and restored.seed == 7
    assert restored.renewal_origin == "busy_start" and restored.renewal_points == 4
    assert restored.to_dict() == report["config"]
    prm = restored.params()
    assert report["derived"]["beta"] == prm.beta
    assert report["pi"] == ba.peakedness_busy(prm)


def test_flag_beta_overrides_config_fraction(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"beta_fraction": 0.5}))
    _, out, _ = run(capsys, "busy", "--config", str(cfg), "--beta", "0.1", "--rho", "1", "--p", "0")
    assert json.loads(out)["derived"]["beta"] == 0.1


def test_simulate_deterministic(capsys, tmp_path):
    args = ["simulate", *BASE, "--cycles", "2000", "--replications", "3", "--seed", "5",
            "--t-max", "5", "--points", "6", "--renewal-replications", "50"]
    outs = []
    for workers in ("1", "1", "2"):
        main(args + ["--workers", workers])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1] == outs[2]
    report = json.loads(outs[0])
    assert "workers" not in report["config"]
    assert report["config"]["seed"] == 5
    names = [v["name"] for v in report["verdicts"]]
    assert "atom_fraction" in names and "renewal_slope_within_2pct" in names


def test_simulate_degenerate(capsys):
    code, out, _ = run(capsys, "simulate", "--lambda", "1", "--rho", "1", "--p", "0", "--beta", "-1",
                       "--cycles", "2000", "--replications", "1")
    report = json.loads(out)
    assert report["stats"]["atom_fraction"]["value"] == 1.0
    assert code == 0


def test_simulate_csv_header(capsys):
    code, out, _ = run(capsys, "simulate", *BASE, "--cycles", "1000", "--replications", "1",
                       "--t-max", "2", "--points", "3", "--renewal-replications", "20", "--format", "csv")
    assert out.splitlines()[0] == "t,empirical,se,r_paper,r_oracle_ordinary,r_oracle_delayed"
