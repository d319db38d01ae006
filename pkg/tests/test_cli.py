import json

import numpy as np
import pytest

from fairpd import certificates, cli, io, solvers

LASSO = {
    "schema": "fairpd/1",
    "experiment": {"family": "nn_lasso", "m": 40, "n": 20, "seed": 3},
    "solvers": [
        {"variant": "CV", "fair": False, "preset": "lasso", "max_outer": 3000},
        {"variant": "CV", "fair": True, "delta": 0.35, "preset": "lasso", "max_outer": 3000},
        {"variant": "PD3O", "fair": True, "delta": 0.5, "max_outer": 3000},
    ],
}


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def _main(cfg, out, *extra):
    return cli.main([extra[0] if extra else "run", "--config", str(cfg), "--out", str(out),
                     "--quiet", *extra[1:]])


def test_run_writes_outputs(tmp_path):
    cfg = _write(tmp_path, LASSO)
    out = tmp_path / "out"
    assert _main(cfg, out) == cli.EXIT_OK
    cols, rows = io.read_csv(out / "summary.csv")
    assert cols == list(cli.SUMMARY_COLUMNS)
    assert [r["solver"] for r in rows] == ["CV", "FCV", "FPD3O"]
    assert all(r["status"] == "converged" for r in rows)
    tcols, trows = io.read_csv(out / "traces" / "FCV.csv")
    assert "time_s" not in tcols and "resi" in tcols and "d_norm" in tcols
    assert len(trows) == rows[1]["iterations"]
    assert (out / "timing" / "FCV.csv").exists()
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["solvers"][1]["sigma"] > 0 and resolved["experiment"]["seed"] == 3
    assert (out / "plots" / "resi.svg").exists()


def test_inline_timing_and_no_plots(tmp_path):
    cfg = _write(tmp_path, LASSO)
    out = tmp_path / "out"
    assert _main(cfg, out, "run", "--inline-timing", "--no-plots") == 0
    assert "time_s" in io.read_csv(out / "traces" / "CV.csv")[0]
    assert "cpu_s" in io.read_csv(out / "summary.csv")[0]
    assert not (out / "plots").exists()


def test_runs_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, LASSO)
    a, b = tmp_path / "a", tmp_path / "b"
    assert _main(cfg, a) == 0 and _main(cfg, b) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and "timing" not in p.parts)
    assert files
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, LASSO)
    out = tmp_path / "out"
    assert _main(cfg, out, "run", "--seed", "9", "--no-plots") == 0
    assert json.loads((out / "config.resolved.json").read_text())["experiment"]["seed"] == 9


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(solvers=[]),
        lambda d: d.update(schema="other/1"),
        lambda d: d["solvers"].append({"variant": "CV", "fair": False, "sigma": 1.0, "tau": 1.5}),
        lambda d: d["solvers"].append({"variant": "XX"}),
        lambda d: d["solvers"].append({"variant": "CV", "colour": 1}),
        lambda d: d["experiment"].update(family="nope"),
    ],
)
def test_invalid_config_writes_nothing(tmp_path, mutate):
    data = json.loads(json.dumps(LASSO))
    mutate(data)
    out = tmp_path / "out"
    assert _main(_write(tmp_path, data), out) == cli.EXIT_CONFIG
    assert not out.exists()


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert _main(bad, tmp_path / "o") == cli.EXIT_CONFIG
    assert _main(tmp_path / "missing.json", tmp_path / "o") == cli.EXIT_CONFIG


def test_divergence_exit_code(tmp_path, monkeypatch):
    # skip validation so that oversized steps reach the solver
    monkeypatch.setattr(cli, "validate", lambda prob, cfg: cfg)
    monkeypatch.setattr(solvers, "validate", lambda prob, cfg: cfg)
    data = json.loads(json.dumps(LASSO))
    data["solvers"] = [{"variant": "CV", "fair": False, "sigma": 1e3, "tau": 1e3,
                        "max_outer": 3000}]
    out = tmp_path / "out"
    with np.errstate(all="ignore"):
        code = _main(_write(tmp_path, data), out)
    assert code == cli.EXIT_DIVERGED
    assert io.read_csv(out / "summary.csv")[1][0]["status"] == "diverged"


def test_sweep_delta(tmp_path):
    data = json.loads(json.dumps(LASSO))
    data["sweep"] = {"deltas": [0.2, 0.5, 0.9], "preset": "lasso"}
    out = tmp_path / "out"
    assert _main(_write(tmp_path, data), out, "sweep-delta") == 0
    _, rows = io.read_csv(out / "sweep_delta.csv")
    assert len(rows) == 6
    assert all(0 < r["iterations"] <= 3000 and r["iterations"] == int(r["iterations"]) for r in rows)
    assert (out / "plots" / "sweep_delta.svg").exists()


def test_sweep_inn(tmp_path):
    data = json.loads(json.dumps(LASSO))
    data["sweep"] = {"inns": [1, 3]}
    out = tmp_path / "out"
    assert _main(_write(tmp_path, data), out, "sweep-inn") == 0
    _, rows = io.read_csv(out / "sweep_inn.csv")
    assert [r["inn"] for r in rows] == [1, 3, 1, 3]
    assert (out / "timing" / "sweep_inn.csv").exists()


def test_sweeps_need_fair_solvers(tmp_path):
    data = json.loads(json.dumps(LASSO))
    data["solvers"] = data["solvers"][:1]
    assert _main(_write(tmp_path, data), tmp_path / "o", "sweep-delta") == cli.EXIT_CONFIG


CERT = {
    "schema": "fairpd/1",
    "experiment": {"family": "quad_nonneg", "n": 20, "rho": 0.3, "hetero": True, "delta": 0.5},
    "solvers": [
        {"variant": v, "fair": True, "stop_tol": None, "max_outer": 150, "inner": {"mode": "criterion"}}
        for v in ("CV", "PDFP", "AFBA", "PD3O")
    ],
    "certify": {"n_points": 5, "gap_range": [20, 150]},
}


def test_certify_passes(tmp_path):
    out = tmp_path / "out"
    assert _main(_write(tmp_path, CERT), out, "certify") == cli.EXIT_OK
    _, rows = io.read_csv(out / "certify_summary.csv")
    assert [r["passed"] for r in rows] == [1, 1, 1, 1]
    assert all(r["gap_slope"] < 0 for r in rows)
    _, cert = io.read_csv(out / "certificates.csv")
    assert len(cert) == 4 * 150


def test_certify_failure_exit_code(tmp_path, monkeypatch):
    real = certificates.audit

    def failing(*args, **kwargs):
        report = real(*args, **kwargs)
        report.failures.append("injected")
        return report

    monkeypatch.setattr(certificates, "audit", failing)
    data = json.loads(json.dumps(CERT))
    data["solvers"] = data["solvers"][:1]
    out = tmp_path / "out"
    assert _main(_write(tmp_path, data), out, "certify") == cli.EXIT_CERT
    assert io.read_csv(out / "certify_summary.csv")[1][0]["failures"] == "injected"


def test_certify_rejects_original_solvers(tmp_path):
    data = json.loads(json.dumps(CERT))
    data["solvers"] = [{"variant": "CV", "fair": False}]
    assert _main(_write(tmp_path, data), tmp_path / "o", "certify") == cli.EXIT_CONFIG
