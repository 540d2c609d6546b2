import sys
from pathlib import Path

import pytest

from eulerlimits.config import ExperimentConfig
from eulerlimits.eos import GasParameters
from eulerlimits.pipeline import run_dichotomy

HERE = Path(__file__).parent
CONFIGS = HERE.parent / "configs"
sys.path.insert(0, str(HERE))


@pytest.fixture
def g2():
    return GasParameters(gamma=2.0, a=1.0)


@pytest.fixture
def g14():
    return GasParameters(gamma=1.4, a=1.0)


def load_config(name, **over):
    cfg = ExperimentConfig.load(CONFIGS / f"{name}.yaml")
    return cfg.with_overrides(**over) if over else cfg


_RUNS = {}


def pipeline_run(name):
    """One cached pipeline run per shipped config."""
    if name not in _RUNS:
        _RUNS[name] = run_dichotomy(load_config(name))
    return _RUNS[name]


@pytest.fixture(scope="session")
def runs():
    return pipeline_run
