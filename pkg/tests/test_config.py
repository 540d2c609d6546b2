import pytest

from eulerlimits.config import DEFAULT_TOLERANCES, ExperimentConfig, default_config
from conftest import CONFIGS


def test_defaults_fill_missing_keys():
    cfg = ExperimentConfig({"gas": {"gamma": 2.0}})
    assert cfg["gas"] == {"gamma": 2.0, "a": 1.0}
    assert cfg.tol == DEFAULT_TOLERANCES
    assert cfg.gas().gamma == 2.0


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = ExperimentConfig.load(path)
    again = ExperimentConfig.loads(cfg.dumps())
    assert again.data == cfg.data
    assert again.dumps() == cfg.dumps()


def test_save_load(tmp_path):
    cfg = ExperimentConfig({"seed": 3})
    cfg.save(tmp_path / "c.yaml")
    assert ExperimentConfig.load(tmp_path / "c.yaml").data == cfg.data


@pytest.mark.parametrize("bad,msg", [
    ({"system": "navier"}, "unknown system"),
    ({"mode": "torus"}, "unknown mode"),
    ({"generator": {"kind": "magic"}}, "unknown generator"),
    ({"target": "guess"}, "unknown target"),
    ({"expect": "maybe"}, "expect"),
    ({"tolerances": {"tol_div": 0.0}}, "positive"),
    ({"coarse_factor": 0}, "coarse_factor"),
])
def test_validation(bad, msg):
    with pytest.raises(ValueError, match=msg):
        ExperimentConfig(bad)


def test_overrides_record_seeds():
    cfg = ExperimentConfig({}).with_overrides(seed=11, levels=3, expect="defect", output="x")
    assert cfg["seed"] == 11 and cfg["battery"]["seed"] == 11
    assert cfg["sequence"]["levels"] == 3
    assert cfg["expect"] == "defect" and cfg["output"] == "x"
    # the original is untouched
    assert default_config()["seed"] == 7


def test_sequence_spec_mode():
    spec = ExperimentConfig({"mode": "bounded"}).sequence_spec()
    assert spec.boundary_mode == "bounded_domain"
    assert spec.levels == 5 and spec.base_cells == (128,)
