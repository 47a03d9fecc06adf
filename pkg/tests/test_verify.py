from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from torusflow.cli import main
from torusflow.report import ANCHORS, Check, Report
from torusflow.verify import (
    SUITES,
    ExperimentConfig,
    dirichlet_matrix,
    plateau_pool,
    poincare_check,
    random_pool,
    run_suite,
    tv_anchor_fields,
)


def discrete_dirichlet_eigenvalue(m: int) -> float:
    """Closed form of the smallest eigenvalue of the m-point second difference."""
    step = 1.0 / (m + 1)
    return 4.0 / step**2 * np.sin(np.pi * step / 2) ** 2


def test_poincare_values_against_closed_form():
    # dense eigensolves carry rounding of order eps * |A|, about 1e-11 relative here
    r2 = poincare_check(2, 200)
    assert r2["min_eigenvalue"] == pytest.approx(discrete_dirichlet_eigenvalue(200), rel=1e-10)
    assert r2["relative_error"] < 1e-3
    assert 3.5 <= r2["richardson_ratio"] <= 4.5
    r4 = poincare_check(4, 200)
    assert r4["min_eigenvalue"] == pytest.approx(discrete_dirichlet_eigenvalue(200) ** 2, rel=1e-7)
    assert r4["relative_error"] < 5e-3
    assert 3.5 <= r4["richardson_ratio"] <= 4.5
    assert r2["target"] == pytest.approx(9.8696044, rel=1e-7)
    assert r4["target"] == pytest.approx(97.409091, rel=1e-7)


def test_poincare_argument_checks():
    with pytest.raises(ValueError):
        poincare_check(3, 50)
    with pytest.raises(ValueError):
        dirichlet_matrix(2)


def test_config_validation_and_rng():
    with pytest.raises(ValueError):
        ExperimentConfig(suite="nope")
    with pytest.raises(ValueError):
        ExperimentConfig(grids=[1, 4])
    with pytest.raises(ValueError):
        ExperimentConfig(tau=-1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(alpha=0.0)
    cfg = ExperimentConfig(grids=[8, 4])
    assert cfg.grids == [4, 8]
    a = cfg.rng(3).standard_normal(4)
    np.testing.assert_array_equal(a, ExperimentConfig(grids=[4, 8]).rng(3).standard_normal(4))
    assert not np.array_equal(a, cfg.rng(4).standard_normal(4))


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"suite": "poincare", "seed": 5, "alpha": 2.0}))
    cfg = ExperimentConfig.from_file(path, seed=7, T=None)
    assert (cfg.suite, cfg.seed, cfg.alpha) == ("poincare", 7, 2.0)
    path.write_text(json.dumps({"suite": "poincare", "colour": "red"}))
    with pytest.raises(ValueError):
        ExperimentConfig.from_file(path)


def test_pools_are_seeded_and_sized():
    cfg = ExperimentConfig(seed=11)
    pool = random_pool(cfg)
    assert len(pool) == 100
    assert {u.grid.n for u in pool} == {1, 2, 3} and {u.grid.k for u in pool} == {2, 4, 8}
    again = random_pool(ExperimentConfig(seed=11))
    assert all(np.array_equal(a.values, b.values) for a, b in zip(pool, again))
    assert len(tv_anchor_fields()) == 10
    for u in plateau_pool(cfg, [8, 16]):
        jumps = np.count_nonzero(u.values != np.roll(u.values, 1))
        assert 2 <= jumps <= 5


def test_check_records():
    c = Check("x", "inner-product", 1.0, 2.0, k=4)
    assert c.passed and c.margin == 1.0 and c.h == 0.25
    assert Check("y", "inner-product", float("nan"), 1.0).passed is False
    with pytest.raises(KeyError):
        Check("z", "not-an-anchor", 0.0, 1.0)
    assert all(isinstance(v, str) and v for v in ANCHORS.values())
    r = Report("demo", [c, Check("w", "inner-product", 3.0, 2.0)])
    assert not r.passed and [f.name for f in r.failures()] == ["w"]
    body = json.loads(r.to_json())
    assert body["n_failed"] == 1 and body["checks"][0]["anchor_text"] == ANCHORS["inner-product"]
    assert r.to_csv().splitlines()[0] == "name,k,h,measured,bound,margin,pass"
    inf = Report("inf", [Check("e", "suite-error", float("inf"), 0.0, passed=False)])
    assert json.loads(inf.to_json())["checks"][0]["measured"] == "inf"


def test_errors_inside_a_suite_are_recorded():
    report = run_suite(ExperimentConfig(suite="poincare", grids=[2]), write=False)
    assert not report.passed
    assert report.checks[0].anchor == "suite-error"
    assert "ValueError" in report.checks[0].details["error"]


def test_run_suite_writes_artifacts(tmp_path):
    report = run_suite(ExperimentConfig(suite="gamma", out=str(tmp_path)))
    assert report.passed
    body = json.loads((tmp_path / "gamma.report.json").read_text())
    assert body["suite"] == "gamma" and body["passed"] is True
    assert "out" not in body["config"]
    rows = (tmp_path / "gamma.csv").read_text().splitlines()
    assert len(rows) == len(report.checks) + 1


def test_every_suite_is_registered():
    assert set(SUITES) == {"operators", "gamma", "interp", "tvflow", "acflow", "tdf", "cac", "poincare"}


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["poincare", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS min_eigenvalue[order=2]" in out
    assert (tmp_path / "poincare.csv").exists()
    # five interior points are far from the limiting eigenvalue
    assert main(["poincare", "--k", "5", "--out", str(tmp_path)]) == 1
    assert main(["poincare", "--tau", "-1", "--out", str(tmp_path)]) == 2
    assert main(["poincare", "--config", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(SystemExit):
        main(["nonsense"])
    with pytest.raises(SystemExit):
        main(["gamma", "--k", "4,x"])


def test_cli_config_file_is_overridden_by_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suite": "poincare", "grids": [5]}))
    assert main(["poincare", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert main(["poincare", "--config", str(cfg), "--k", "200", "--out", str(tmp_path)]) == 0


def test_trajectories_are_written_on_request(tmp_path):
    assert main(["acflow", "--k", "16", "--T", "0.05", "--tau", "1e-3", "--out", str(tmp_path), "--save-trajectories"]) == 0
    files = sorted(p.name for p in (tmp_path / "trajectories").iterdir())
    assert files and all(name.endswith(".csv") for name in files)
    header = (tmp_path / "trajectories" / files[0]).read_text().splitlines()[0]
    assert header.startswith("t,u0,")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "torusflow.cli", "gamma", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip().endswith("checks passed")
