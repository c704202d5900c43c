import pytest

from bieinv import config
from bieinv.errors import ConfigurationError


def test_parse_spacing_forms():
    assert config.parse_spacing("0.125") == 0.125
    assert config.parse_spacing("1/64") == 1.0 / 64.0
    assert config.parse_spacing(" 1 / 8 ") == 0.125
    with pytest.raises(ConfigurationError):
        config.parse_spacing("one sixty-fourth")
    with pytest.raises(ConfigurationError):
        config.parse_spacing("1/0")


def test_defaults_validate_and_match_benchmark_sizes():
    cfg = config.RunConfig().validate()
    assert cfg.boundary_sources_per_edge * 4 == 40
    assert cfg.interior_sources == 100
    assert cfg.width == 10
    assert cfg.epochs == 2000


def test_ini_round_trip(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("""
[problem]
name = piecewise_lshape
fdm_h = 1/32
anchor_point = 0.25, 0.75
anchor_value = 5.0

[collocation]
sources_per_edge = 6
margin = 0.05

[train]
epochs = 300
lr = 2e-3
resample_interior = yes

[recovery]
parametrization = linear

[output]
dir = results
plots = off

[convergence]
ladder = 8, 16
""")
    cfg = config.load_config(p)
    assert cfg.problem == "piecewise_lshape"
    assert cfg.fdm_h == 1.0 / 32.0
    assert cfg.anchor_point == (0.25, 0.75)
    assert cfg.anchor_value == 5.0
    assert cfg.boundary_sources_per_edge == 6
    assert cfg.margin == 0.05
    assert cfg.epochs == 300 and cfg.lr == 2e-3
    assert cfg.resample_interior is True
    assert cfg.recovery_parametrization == "linear"
    assert cfg.out_dir == "results" and cfg.plots is False
    assert cfg.ladder == (8, 16)
    # untouched keys keep their defaults
    assert cfg.checks_per_edge == config.RunConfig().checks_per_edge


def test_unknown_section_and_key_rejected(tmp_path):
    bad_section = tmp_path / "a.ini"
    bad_section.write_text("[solver]\nmode = fast\n")
    with pytest.raises(ConfigurationError, match=r"\[solver\]"):
        config.load_config(bad_section)
    bad_key = tmp_path / "b.ini"
    bad_key.write_text("[train]\nlearning_rate = 0.1\n")
    with pytest.raises(ConfigurationError, match="train.learning_rate"):
        config.load_config(bad_key)


def test_unparseable_value_names_the_key(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[train]\nepochs = soon\n")
    with pytest.raises(ConfigurationError, match="train.epochs"):
        config.load_config(p)


def test_missing_file():
    with pytest.raises(ConfigurationError):
        config.load_config("/nonexistent/run.ini")


def test_overrides_apply_after_file(tmp_path):
    p = tmp_path / "d.ini"
    p.write_text("[train]\nepochs = 300\n")
    cfg = config.load_config(p, overrides={"epochs": 700, "seed": 2})
    assert cfg.epochs == 700 and cfg.seed == 2
    with pytest.raises(ConfigurationError, match="no_such_knob"):
        config.load_config(p, overrides={"no_such_knob": 1})


@pytest.mark.parametrize("field,value,fragment", [
    ("boundary_sources_per_edge", 0, "sources_per_edge"),
    ("boundary_order", 40, "boundary_order"),
    ("interior_mode", "qmc", "interior_mode"),
    ("margin", 0.5, "margin"),
    ("lr", 0.0, "train.lr"),
    ("adam_beta1", 1.0, "adam_beta1"),
    ("feedback", -0.1, "feedback"),
    ("recovery_mode", "regions", "recovery.mode"),
    ("recovery_parametrization", "log", "parametrization"),
    ("fdm_h", 0.3, "fdm_h"),
    ("epochs", -5, "train.epochs"),
])
def test_validation_messages(field, value, fragment):
    cfg = config.RunConfig(**{field: value})
    with pytest.raises(ConfigurationError, match=fragment):
        cfg.validate()


def test_anchor_point_and_value_must_pair():
    with pytest.raises(ConfigurationError, match="anchor"):
        config.RunConfig(anchor_point=(0.5, 0.5)).validate()
    with pytest.raises(ConfigurationError, match="anchor"):
        config.RunConfig(anchor_value=2.0).validate()
    config.RunConfig(anchor_point=(0.5, 0.5), anchor_value=2.0).validate()


def test_hash_stable_and_sensitive():
    a = config.RunConfig()
    b = config.RunConfig()
    assert a.hash() == b.hash()
    assert len(a.hash()) == 64
    c = a.replace(seed=a.seed + 1)
    assert c.hash() != a.hash()
    # replace returns a new object, the original is untouched
    assert a.seed != c.seed


def test_to_dict_is_json_friendly():
    import json
    cfg = config.RunConfig(anchor_point=(0.1, 0.2), anchor_value=1.0)
    text = json.dumps(cfg.to_dict())
    back = json.loads(text)
    assert back["anchor_point"] == [0.1, 0.2]
    assert back["ladder"] == [16, 32, 64, 128]
