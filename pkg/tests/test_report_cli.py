import json
import subprocess
import sys

import pytest
import yaml

from eulerlimits.cli import main
from eulerlimits.report import (
    EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_MISMATCH, EXIT_OK, LEVEL_COLUMNS, dumps_json, emit_report,
    exit_code,
)
from eulerlimits.serialize import read_field, read_matrix_measure, read_young

SMALL = {
    "system": "isentropic",
    "expect": "strong",
    "sequence": {"levels": 3, "base_cells": [32], "n_times": 11},
    "initial": {"kind": "constant", "rho": 1.0, "u": [0.0]},
    "generator": {"kind": "constant"},
    "target": "weak_limit",
    "coarse_factor": 4,
    "battery": {"count": 4},
}


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return str(p)


def test_exit_code_contract():
    assert exit_code(None, None) == EXIT_OK
    assert exit_code("strong_convergence", "strong") == EXIT_OK
    assert exit_code("not_a_weak_solution", "defect") == EXIT_OK
    assert exit_code("strong_convergence", "defect") == EXIT_MISMATCH
    assert exit_code("inconclusive", "strong") == EXIT_MISMATCH
    assert exit_code("inconclusive", None) == EXIT_INCONCLUSIVE
    assert exit_code("not_a_weak_solution", None) == EXIT_OK


def test_empty_results_header_only(tmp_path):
    assert emit_report(None, tmp_path) == EXIT_OK
    assert (tmp_path / "levels.csv").read_text() == ",".join(LEVEL_COLUMNS) + "\n"
    assert json.loads((tmp_path / "summary.json").read_text())["branch"] is None


def test_unwritable_directory(tmp_path):
    (tmp_path / "file").write_text("")
    with pytest.raises(OSError):
        emit_report(None, tmp_path / "file" / "sub")


def test_json_non_finite():
    assert json.loads(dumps_json({"a": float("inf"), "b": float("nan")})) == {"a": "inf", "b": "nan"}


def test_dichotomy_match_and_mismatch(small, tmp_path):
    assert main(["dichotomy", "--config", small, "--out", str(tmp_path / "a")]) == EXIT_OK
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert s["branch"] == "strong_convergence" and s["exit_code"] == 0
    # the full resolved config is embedded
    assert s["config"]["sequence"]["n_times"] == 11 and "tolerances" in s["config"]
    assert main(["dichotomy", "--config", small, "--out", str(tmp_path / "b"), "--expect", "defect"]) == EXIT_MISMATCH


def test_byte_identical_reruns(small, tmp_path):
    for d in ("a", "b"):
        assert main(["dichotomy", "--config", small, "--out", str(tmp_path / d), "--plots"]) == EXIT_OK
    for name in ("summary.json", "levels.csv", "residuals.svg", "energy.svg", "defect.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_runtime_error_exit_code(tmp_path, capsys):
    assert main(["dichotomy", "--config", str(tmp_path / "missing.yaml")]) == EXIT_ERROR
    assert capsys.readouterr().err.startswith("error:")


def test_generate_writes_fields(small, tmp_path):
    assert main(["generate", "--config", small, "--out", str(tmp_path)]) == EXIT_OK
    f = read_field(tmp_path / "fields" / "level_3.euf")
    assert f.grid.cells == (128,) and f.level == 3
    assert (tmp_path / "config.yaml").exists()


def test_verify_defect_jensen(small, tmp_path):
    out = str(tmp_path)
    assert main(["verify", "--config", small, "--out", out]) == EXIT_OK
    assert json.loads((tmp_path / "verify.json").read_text())["consistency"] == "consistent"
    assert main(["defect", "--config", small, "--out", out]) == EXIT_OK
    assert json.loads((tmp_path / "defects.json").read_text())["defect_mass"] == 0.0
    assert read_matrix_measure(tmp_path / "D.csv").grid.cells == (8,)
    assert main(["jensen", "--config", small, "--out", out]) == EXIT_OK
    assert json.loads((tmp_path / "jensen.json").read_text())["counts"]["dirac"] == 8
    assert len(read_young(tmp_path / "young.csv").measures) == 8


def test_liouville_counterexample(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"sequence": {"base_cells": [64]}}))
    assert main(["liouville", "--config", str(cfg), "--out", str(tmp_path), "--counterexample"]) == EXIT_OK
    s = json.loads((tmp_path / "liouville.json").read_text())
    assert s["psd"] is False and s["min_eig"] < 0
    assert s["verdict"] == "PSD hypothesis violated - theorem inapplicable"


def test_report_subcommand(small, tmp_path):
    out = str(tmp_path / "r")
    assert main(["report", "--config", small, "--out", out]) == EXIT_OK   # nothing yet: empty report
    assert main(["dichotomy", "--config", small, "--out", out]) == EXIT_OK
    assert main(["report", "--config", small, "--out", out, "--expect", "defect"]) == EXIT_MISMATCH


def test_console_entry_point(small, tmp_path):
    r = subprocess.run([sys.executable, "-m", "eulerlimits.cli", "dichotomy", "--config", small,
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout) == {"branch": "strong_convergence", "exit_code": 0}
