import pytest

from imlmi.config import (ConfigError, ExperimentConfig, apply_overrides, config_hash,
                          expand_config, parse_config)


def test_defaults():
    cfg = parse_config({})
    assert cfg.n == 500 and cfg.replications == 200 and cfg.ground_truth_replications == 500
    assert cfg.resample.k == 20 and cfg.learner.kind == "gbt"
    assert cfg.explainers == ("PD", "PFI", "SHAP") and cfg.m == 1


def test_unknown_keys_are_named():
    with pytest.raises(ConfigError) as e:
        parse_config({"imputer": {"kind": "hotdeck"}, "miss": {"mechanism": "MCAR"}})
    assert e.value.key == "imputer.kind"
    with pytest.raises(ConfigError) as e:
        parse_config({"dgp": {"colour": 1}})
    assert e.value.key == "dgp.colour"
    with pytest.raises(ConfigError) as e:
        parse_config({"replicates": 3})
    assert e.value.key == "replicates"


def test_missing_data_needs_imputer():
    with pytest.raises(ConfigError):
        parse_config({"miss": {"mechanism": "MAR", "proportion": 0.2}})


def test_default_m_from_proportion():
    cfg = parse_config({"miss": {"mechanism": "MAR", "proportion": 0.4},
                        "imputer": {"kind": "mice_pmm"}})
    assert cfg.m == 40


def test_overrides():
    doc = apply_overrides({"miss": {"mechanism": "MCAR", "proportion": 0.1}},
                          ["miss.proportion=0.4", "dgp.kind=nonlinear", "n=100"])
    assert doc == {"miss": {"mechanism": "MCAR", "proportion": 0.4},
                   "dgp": {"kind": "nonlinear"}, "n": 100}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["bogus.key=1"])
    with pytest.raises(ConfigError):
        apply_overrides({}, ["n"])


def test_sweep_order():
    cfgs = expand_config({"imputer": {"kind": "mean"}, "miss": {"mechanism": "MAR"},
                          "sweep": {"miss.proportion": [0.1, 0.2],
                                    "imputer.kind": ["mean", "mice_pmm"]}})
    got = [(c.proportion, c.imputer.kind) for c in cfgs]
    assert got == [(0.1, "mean"), (0.1, "mice_pmm"), (0.2, "mean"), (0.2, "mice_pmm")]


def test_compute_key_ignores_variants():
    a = parse_config({"variance": {"adjusted": True}, "alpha": 0.05})
    b = parse_config({"variance": {"adjusted": False}, "alpha": 0.1,
                      "resample": {"refits_used": 5}})
    assert config_hash(a.compute_key()) == config_hash(b.compute_key())
    assert config_hash(a.to_dict()) != config_hash(b.to_dict())
    c = parse_config({"n": 300})
    assert config_hash(a.ground_truth_key()) != config_hash(c.ground_truth_key())


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(alpha=1.5)
    with pytest.raises(ConfigError):
        parse_config({"explainers": ["ALE"]})
