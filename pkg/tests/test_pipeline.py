import numpy as np
import pytest

from eulerlimits.config import ExperimentConfig
from eulerlimits.pipeline import run_dichotomy
from eulerlimits.report import dumps_json
from conftest import load_config


def test_constant_sequence_strong_with_zero_evidence():
    cfg = ExperimentConfig({"sequence": {"levels": 3, "base_cells": [32], "n_times": 11},
                            "initial": {"kind": "constant"}, "generator": {"kind": "constant"},
                            "target": "weak_limit", "coarse_factor": 4})
    res = run_dichotomy(cfg)
    ev = res.verdict.evidence
    assert res.verdict.branch == "strong_convergence"
    assert ev["defect_mass"] == 0.0 and max(ev["relative_energy"]) < 1e-14
    assert max(ev["consistency"]["e1_sup"] + ev["consistency"]["e2_sup"]) < 1e-14


def test_viscous_riemann_relative_energy_decreases(runs):
    ev = runs("viscous_riemann").verdict.evidence
    rel = ev["relative_energy"]
    assert all(b < a for a, b in zip(rel, rel[1:]))
    assert ev["consistency"]["verdict"] in ("consistent", "consistent-trend")


def test_concentration_atomic_defect(runs):
    res = runs("concentration")
    D = res.artifacts["defects"].D
    tr = D.trace
    assert res.verdict.branch == "not_a_weak_solution"
    # all of the defect sits in the coarse cell holding the concentration point
    assert np.count_nonzero(tr > 1e-12 * tr.max()) == 1
    assert res.verdict.evidence["liouville"] == "theorem-consistent"


def test_oscillatory_defect(runs):
    res = runs("oscillatory")
    assert res.verdict.branch == "not_a_weak_solution"
    assert res.verdict.evidence["R_e_total"] > 0


def test_full_constant_strong(runs):
    res = runs("full_constant")
    assert res.verdict.branch == "strong_convergence" and res.verdict.flags == []


def test_full_oscillatory_strict_gap(runs):
    ev = runs("full_oscillatory").verdict.evidence
    assert runs("full_oscillatory").verdict.branch == "not_a_weak_solution"
    assert ev["jensen_counts"]["strict"] > 0 and ev["jensen_gap_max"] > 0


def test_entropy_floor_flagged_before_classification(runs):
    res = runs("full_floor_violation")
    assert res.verdict.branch == "inconclusive"
    assert "entropy floor violated" in res.verdict.flags
    assert sum(res.verdict.evidence["entropy_floor_violations"]) > 0


@pytest.mark.parametrize("name", ["oscillatory", "full_oscillatory"])
def test_determinism(runs, name):
    again = run_dichotomy(load_config(name))
    first = runs(name)
    assert again.verdict.branch == first.verdict.branch
    assert dumps_json(again.verdict.evidence) == dumps_json(first.verdict.evidence)
    assert dumps_json(again.rows) == dumps_json(first.rows)


def test_branches_exclusive(runs):
    for name in ("concentration", "oscillatory", "full_oscillatory"):
        ev = runs(name).verdict.evidence
        assert not ev["strong_trend"]
