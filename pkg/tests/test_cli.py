import json
import subprocess
import sys

import pytest

from mobius_va.cli import ConfigError, RunConfig, main


def run_cli(tmp_path, config: dict, *extra) -> tuple[int, dict | None]:
    cfg = tmp_path / "run.json"
    out = tmp_path / "report.json"
    cfg.write_text(json.dumps(config))
    code = main(["run", "--config", str(cfg), "--out", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def strip_runtime(report: dict) -> dict:
    report = json.loads(json.dumps(report))
    for entry in report["checks"]:
        entry.pop("runtime")
    report["config"].pop("out", None)
    return report


def test_heisenberg_axioms_pass(tmp_path):
    code, report = run_cli(tmp_path, {"model": "heisenberg", "max_weight": 8, "suite": "axioms"})
    assert code == 0
    assert report["summary"]["fail"] == 0
    assert report["schema_version"] == 1
    for entry in report["checks"]:
        assert set(entry) >= {"name", "anchor", "status", "deviation", "runtime"}
        assert entry["status"] in ("pass", "fail", "inconclusive")


def test_lee_yang_gram_report(tmp_path):
    code, report = run_cli(tmp_path, {"model": {"name": "virasoro", "c": "-22/5"}, "max_weight": 4, "suite": "gram"})
    assert code == 0
    checks = {e["name"]: e for e in report["checks"]}
    assert checks["gram.gram_levels"]["details"]["levels"]["2"] == [["-11/5"]]
    assert checks["gram.radical"]["details"]["kernel_dims"][4] == 1


def test_margin_above_max_weight_is_a_config_error(tmp_path):
    code, report = run_cli(tmp_path, {"model": "heisenberg", "max_weight": 2, "margin": 3})
    assert code == 2 and report is None


@pytest.mark.parametrize(
    "config",
    [
        {"model": "ising"},
        {"model": "virasoro", "max_weight": 6},
        {"model": "virasoro", "c": "one half", "max_weight": 6},
        {"model": "heisenberg", "tolerances": {"covariance": -1}},
        {"model": "heisenberg", "tolerances": {"nonsense": 1e-3}},
        {"model": "heisenberg", "band": 0},
        {"model": "heisenberg", "margin": 0, "max_weight": 4},
        {"model": "heisenberg", "suite": "everything"},
        {"model": "heisenberg", "colour": "blue"},
        {"model": "heisenberg", "max_weight": "8"},
    ],
)
def test_invalid_configs(tmp_path, config):
    code, _ = run_cli(tmp_path, config)
    assert code == 2


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["frobnicate"]) == 2


def test_command_line_overrides(tmp_path):
    out = tmp_path / "r.json"
    code = main(["run", "--model", "virasoro", "--c=1/2", "--max-weight", "6", "--suite", "roundtrip", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["config"]["model"] == "virasoro" and report["config"]["c"] == "1/2"


def test_output_is_deterministic(tmp_path):
    config = {"model": {"name": "virasoro", "c": "1/2", "simple": True}, "max_weight": 6, "suite": "gram", "seed": 5}
    _, first = run_cli(tmp_path, config)
    _, second = run_cli(tmp_path, config)
    assert strip_runtime(first) == strip_runtime(second)


def test_failing_check_gives_exit_one(tmp_path):
    # K=3 words cannot reach J_{-1}^4 Omega, so the rank experiment fails
    code, report = run_cli(tmp_path, {"model": "heisenberg", "max_weight": 7, "suite": "reeh_schlieder", "band": 16})
    assert code == 1
    assert report["checks"][0]["details"]["rank"] < report["checks"][0]["details"]["full_dim"]


def test_config_defaults():
    cfg = RunConfig.from_dict({"model": "heisenberg"})
    assert cfg.effective_margin() == 3 and cfg.suites()[0] == "axioms"
    assert RunConfig.from_dict({"model": "virasoro", "c": "2"}).effective_margin() == 4
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"model": "heisenberg", "simple": True})


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run(
        [sys.executable, "-m", "mobius_va.cli", "run", "--model", "heisenberg", "--max-weight", "4",
         "--suite", "roundtrip", "--out", str(out)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert "1 passed" in proc.stderr
