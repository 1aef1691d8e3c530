import copy

import pytest

from conftest import CONFIGS, load_config_doc
from genthiele.config import ConfigError, ModelConfig, build, load_config, parse_states, validate_model
from genthiele.model import ACTIVE, disabled


def diags(doc):
    return validate_model(ModelConfig.from_dict(doc))


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    assert validate_model(load_config(path)) == []


def test_reference_config_monthly_valid():
    doc = load_config_doc("disability.json")
    doc["grid_step"] = "1/12"
    assert diags(doc) == []


def test_negative_step():
    doc = load_config_doc("disability.json")
    doc["grid_step"] = -0.1
    out = diags(doc)
    assert [(d.level, d.message) for d in out] == [("error", "grid_step must be positive")]


def test_horizon_80_warns_about_rehabilitation():
    doc = load_config_doc("disability.json")
    doc["horizon_end"] = 80
    out = diags(doc)
    assert out and all(d.level == "warning" for d in out)
    assert any("rehabilitation" in d.message for d in out)


def test_indivisible_horizon():
    doc = load_config_doc("term_insurance.json")
    doc["grid_step"] = 0.3
    assert any("multiple" in d.message for d in diags(doc))


def test_schema_version():
    doc = load_config_doc("term_insurance.json")
    doc["schema"] = 2
    assert any("schema" in d.message for d in diags(doc))


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: d.pop("grid_step"), "grid_step"),
    (lambda d: d.update(model_kind="bogus"), "model_kind"),
    (lambda d: d.update(t_start="abc"), "t_start"),
])
def test_malformed_documents(mutate, needle):
    doc = load_config_doc("term_insurance.json")
    mutate(doc)
    with pytest.raises(ConfigError, match=needle):
        ModelConfig.from_dict(doc)


def test_unknown_state_in_discrete_section():
    doc = load_config_doc("term_insurance.json")
    doc["discrete"]["intensities"][0]["to"] = "ghost"
    assert any("ghost" in d.message for d in diags(doc))


def test_spouse_checks():
    doc = load_config_doc("random_spouse.json")
    bad = copy.deepcopy(doc)
    bad["random_spouse"]["g"] = 1.5
    assert any("g must" in d.message for d in diags(bad))
    bad = copy.deepcopy(doc)
    bad["random_spouse"]["phi"] = [[40, 1.0]]
    assert any("node 0" in d.message for d in diags(bad))
    bad = copy.deepcopy(doc)
    bad["random_spouse"]["phi"] = [[0, 0.5], [1, 0.2]]
    assert any("sum to 1" in d.message for d in diags(bad))


def test_disability_needs_constant_rate():
    doc = load_config_doc("disability.json")
    doc["r"] = {"table": [[30, 0.02], [67, 0.04]]}
    assert any("constant interest" in d.message for d in diags(doc))


def test_rate_table_for_discrete_model():
    doc = load_config_doc("term_insurance.json")
    doc["r"] = {"table": [[0, 0.03], [20, 0.03]]}
    doc["grid_step"] = "1/365"
    setup = build(ModelConfig.from_dict(doc))
    assert setup.reserve(setup.solve(), setup.default_states()[0]) == pytest.approx(0.137668, abs=1e-3)


def test_rehabilitation_modes():
    doc = load_config_doc("disability_monthly.json")
    values = {}
    for mode in ("onset", "duration_independent", "off"):
        doc["disability_rehab"]["rehabilitation"] = mode
        setup = build(ModelConfig.from_dict(doc))
        values[mode] = setup.reserve(setup.solve(), disabled(30.0))
    assert values["off"] > values["onset"] > values["duration_independent"]


def test_parse_states():
    setup = build(load_config(CONFIGS / "disability_monthly.json"))
    assert parse_states(setup, ["active", "disabled@30"]) == [ACTIVE, disabled(30.0)]
    with pytest.raises(ConfigError):
        parse_states(setup, ["nope"])
    dsetup = build(load_config(CONFIGS / "term_insurance.json"))
    assert [s.index for s in parse_states(dsetup, ["dead", "alive"])] == [1, 0]


def test_fraction_step_and_hash_stable():
    a = load_config(CONFIGS / "disability.json")
    b = load_config(CONFIGS / "disability.json")
    assert a.grid_step == 1 / 360
    assert a.sha256() == b.sha256()
