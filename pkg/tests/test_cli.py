import json
from pathlib import Path

import pytest

from regenmc.cli import main, run, validate

CONFIGS = Path(__file__).parent / "configs"
GOLDEN = Path(__file__).parent / "golden"


def load(name):
    return json.loads((CONFIGS / name).read_text())


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def test_validate_accepts_every_fixture():
    for cfg in CONFIGS.glob("*.json"):
        assert validate(json.loads(cfg.read_text())) == [], cfg.name


def test_validate_missing_seed():
    cfg = load("simulate_tiny.json")
    del cfg["seed"]
    assert any("seed" in v for v in validate(cfg))


def test_validate_kde_moment_coupling():
    cfg = load("kde_rate_tiny.json")
    cfg.update(beta=0.5, p=3, d=1)
    assert validate(cfg) == []          # 0.5 * 3/2 = 0.75 < 1 passes
    cfg["beta"] = 0.8                   # 0.8 * 3/2 = 1.2 >= 1 fails
    assert any("beta*p/(p-1)" in v for v in validate(cfg))


def test_validate_bounds_sigma_hypothesis():
    cfg = load("bounds_tiny.json")
    cfg.update(sigma_prime=5.0, L=2.0, U=1.0)
    assert any("sigma' <= L*U" in v for v in validate(cfg))


def test_validate_bounds_requires_explicit_constant():
    cfg = load("bounds_tiny.json")
    del cfg["constants"]["M_const"]
    assert any("M_const" in v for v in validate(cfg))


def test_manifest_records_replication_seeds(tmp_path):
    manifest, _ = run(load("kde_rate_tiny.json"), tmp_path)
    seeds = manifest["replication_seeds"]
    assert len(seeds) == 3 and all(len(row) == 3 for row in seeds)
    flat = [s for row in seeds for s in row]
    assert len(set(flat)) == len(flat)


def test_validate_lists_every_violation():
    cfg = {"experiment": "kde-rate", "n_grid": [1], "replications": 0, "beta": -1}
    violations = validate(cfg)
    assert len(violations) >= 4


def test_run_rejects_invalid_config(tmp_path):
    with pytest.raises(ValueError, match="invalid config"):
        run({"experiment": "simulate"}, tmp_path)


# ---------------------------------------------------------------------------
# Runs, determinism, golden files
# ---------------------------------------------------------------------------


def test_simulate_matches_golden(tmp_path):
    run(load("simulate_tiny.json"), tmp_path)
    got = (tmp_path / "trajectory.csv").read_bytes()
    assert got == (GOLDEN / "simulate_trajectory.csv").read_bytes()


def test_simulate_row_count(tmp_path):
    cfg = load("simulate_tiny.json")
    run(cfg, tmp_path)
    lines = (tmp_path / "trajectory.csv").read_text().strip().splitlines()
    assert len(lines) == 3 + cfg["n"]


def test_identical_configs_identical_digests(tmp_path):
    m1, _ = run(load("blocks_tiny.json"), tmp_path / "a")
    m2, _ = run(load("blocks_tiny.json"), tmp_path / "b")
    assert m1["outputs"] == m2["outputs"]
    assert m1["config_hash"] == m2["config_hash"]


def test_seed_override_changes_digests(tmp_path):
    cfg = load("blocks_tiny.json")
    m1, _ = run(cfg, tmp_path / "a")
    cfg["seed"] += 1
    m2, _ = run(cfg, tmp_path / "b")
    assert m1["outputs"] != m2["outputs"]


def test_every_experiment_kind_matches_golden_digests(tmp_path):
    golden = json.loads((GOLDEN / "digests.json").read_text())
    for name in ("simulate_tiny.json", "blocks_tiny.json", "rademacher_tiny.json",
                 "bounds_tiny.json", "kde_rate_tiny.json", "mh_credible_tiny.json",
                 "verify_lemmas_tiny.json"):
        manifest, passed = run(load(name), tmp_path / name.replace(".json", ""))
        assert manifest["outputs"] == golden[name], name
        assert passed in (True, None), name


def test_kde_rate_outputs_shape(tmp_path):
    cfg = load("kde_rate_tiny.json")
    run(cfg, tmp_path)
    rows = (tmp_path / "kde_rate.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + len(cfg["n_grid"])
    report = json.loads((tmp_path / "kde_rate.json").read_text())
    assert {"slope", "theory_slope", "pass"} <= report.keys()


def test_lemma_outputs(tmp_path):
    run(load("verify_lemmas_tiny.json"), tmp_path)
    summary = json.loads((tmp_path / "lemma_summary.json").read_text())
    assert summary["pass"] and summary["holds"] == summary["checks"]
    header = (tmp_path / "lemma_checks.csv").read_text().splitlines()[0]
    assert header == "instance,eps,side,lhs,rhs,pass"


def test_jobs_do_not_change_results(tmp_path):
    cfg = load("kde_rate_tiny.json")
    m1, _ = run(cfg, tmp_path / "serial", jobs=1)
    m2, _ = run(cfg, tmp_path / "parallel", jobs=2)
    assert m1["outputs"] == m2["outputs"]


# ---------------------------------------------------------------------------
# Entry point and exit codes
# ---------------------------------------------------------------------------


def test_main_pass_exit_code(tmp_path, capsys):
    code = main(["simulate", "--config", str(CONFIGS / "simulate_tiny.json"),
                 "--out", str(tmp_path)])
    assert code == 0
    assert "[PASS]" in capsys.readouterr().out


def test_main_threshold_failure_exit_code(tmp_path, capsys):
    cfg = load("kde_rate_tiny.json")
    cfg["slope_tolerance"] = 1e-6
    path = tmp_path / "strict.json"
    path.write_text(json.dumps(cfg))
    code = main(["kde-rate", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "[FAIL]" in capsys.readouterr().out


def test_main_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_main_seed_override(tmp_path):
    code = main(["simulate", "--config", str(CONFIGS / "simulate_tiny.json"),
                 "--seed", "99", "--out", str(tmp_path)])
    assert code == 0
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[1]
    assert header.split(",")[2] == "99"


def test_main_validate_subcommand(capsys):
    assert main(["validate", "--config", str(CONFIGS / "bounds_tiny.json")]) == 0
    assert "config ok" in capsys.readouterr().out
