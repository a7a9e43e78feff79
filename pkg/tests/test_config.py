import json

import pytest
from hypothesis import given, strategies as st

from moyal_dirac.config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config

configs = st.fixed_dictionaries(
    {"experiment": st.sampled_from(EXPERIMENTS)},
    optional={
        "theta": st.floats(0, 5, allow_nan=False),
        "mass": st.floats(0.1, 3) | st.floats(-3, -0.1),
        "seed": st.integers(0, 1000),
        "record_timing": st.booleans(),
        "modes": st.integers(1, 10),
        "potential": st.fixed_dictionaries({}, optional={
            "kind": st.sampled_from(["pointwise", "star_sym", "star_sandwich"]),
            "lambdas": st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=4),
            "steps": st.integers(1, 512),
        }),
        "tolerances": st.dictionaries(st.sampled_from(["car", "associativity"]), st.floats(0, 1)),
    })


@given(data=configs)
def test_round_trip(data):
    cfg = ExperimentConfig.from_dict(data)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert again.digest() == cfg.digest()


@pytest.mark.parametrize("bad", [
    {},
    {"experiment": "nope"},
    {"experiment": "moyal-check", "mass": 0},
    {"experiment": "moyal-check", "theta": -1},
    {"experiment": "moyal-check", "grid": {"points": [12, 16]}},
    {"experiment": "dirac-check", "dimension": 3, "grid": {"points": [32]}},
    {"experiment": "dirac-check", "grid": {"time_samples": 100}},
    {"experiment": "dirac-check", "grid": {"points": [32], "lengths": [1.0, 2.0]}},
    {"experiment": "fock-check", "modes": 11},
    {"experiment": "fock-check", "unknown": 1},
])
def test_schema_violations(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_dimension_axes():
    assert ExperimentConfig.from_dict({"experiment": "moyal-check", "dimension": 2, "grid": {"points": [16, 16]}})
    assert ExperimentConfig.from_dict({"experiment": "scatter-ht", "dimension": 3, "grid": {"points": [32, 32]}})


def test_with_value():
    cfg = ExperimentConfig.from_dict({"experiment": "scatter-ht"})
    assert cfg.with_value("lambda", 0.1).potential["lambdas"] == [0.1]
    assert cfg.with_value("tau", 12).grid["tau"] == 12.0
    assert cfg.with_value("resolution", 128).grid["time_samples"] == 128
    assert cfg.with_value("theta", 0.5).theta == 0.5
    assert cfg.with_value("lambda", 0.1).digest() != cfg.digest()
    with pytest.raises(ConfigError):
        cfg.with_value("mass", 1.0)
    with pytest.raises(ConfigError):
        cfg.with_value("resolution", 100)


def test_load_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
