import numpy as np
import pytest

from entecho.config import Config, load_config, parse_config, random_profile
from entecho.exceptions import ConfigInvalid
from entecho.models import Kind

BASE = {
    "model": {"kind": "chain1d", "L": 20},
    "pre": {"mass": 1.5},
    "post": {"mass": 0.3},
    "subsystem": {"length": 6},
}


def with_(**sections):
    cfg = {k: dict(v) for k, v in BASE.items()}
    for k, v in sections.items():
        cfg[k] = v
    return cfg


def test_defaults():
    cfg = parse_config(BASE)
    assert cfg.time.max == 30.0 and cfg.time.steps == 600
    assert cfg.times().size == 601
    assert cfg.detector.delta_jump == 0.01 and cfg.detector.delta_slope == 0.5
    (label, p), = cfg.protocols()
    assert label == "" and p.subsystem == (0, 6)


def test_unknown_key_is_an_error():
    with pytest.raises(ConfigInvalid) as err:
        parse_config(with_(physics={"temprature": 0.1}))
    assert "physics.temprature" in err.value.errors


def test_one_mass_form_only():
    with pytest.raises(ConfigInvalid, match="exactly one"):
        parse_config(with_(pre={"mass": 1.0, "profile": [1.0] * 20}))
    with pytest.raises(ConfigInvalid):
        parse_config(with_(pre={}))


def test_profile_length_checked():
    cfg = parse_config(with_(pre={"profile": [1.0] * 19}))
    with pytest.raises(ConfigInvalid, match="19 sites"):
        cfg.protocols()


def test_segments_expand():
    cfg = parse_config(with_(post={"segments": [{"length": 10, "mass": 0.5}, {"length": 10, "mass": 1.7}]}))
    _, post = cfg.model_specs()
    assert post.kind is Kind.PROFILE
    assert post.mass_profile == (0.5,) * 10 + (1.7,) * 10


def test_random_profile_is_seeded_pcg64():
    cfg = parse_config(with_(pre={"random": {"low": 1.2, "high": 1.8}}, post={"random": {"low": 0.0, "high": 1.0}}))
    pre, post = cfg.model_specs(seed=99)
    rng = np.random.Generator(np.random.PCG64(99))
    np.testing.assert_array_equal(pre.mass_profile, 1.2 + (1.8 - 1.2) * rng.random(20))
    np.testing.assert_array_equal(post.mass_profile, rng.random(20))
    again, _ = cfg.model_specs(seed=99)
    assert again == pre
    other, _ = cfg.model_specs(seed=100)
    assert other != pre


def test_random_profile_helper():
    r = random_profile(np.random.Generator(np.random.PCG64(0)), 5, -1.0, 1.0)
    assert r.shape == (5,) and np.all((r >= -1) & (r < 1))


def test_random_range_ordered():
    with pytest.raises(ConfigInvalid):
        parse_config(with_(pre={"random": {"low": 2.0, "high": 1.0}}))


def test_subsystem_must_fit():
    with pytest.raises(ConfigInvalid, match="does not fit"):
        parse_config(with_(subsystem={"length": 20}))


def test_several_subsystems_get_labels():
    cfg = parse_config(with_(subsystem=[{"length": 4}, {"start": 10, "length": 4, "label": "B"}]))
    assert [label for label, _ in cfg.protocols()] == ["S0", "B"]


def test_chern_rules():
    cfg = parse_config(with_(model={"kind": "chern2d", "L": 10, "Ly": 4}))
    pre, _ = cfg.model_specs()
    assert pre.Ly == 4
    with pytest.raises(ConfigInvalid, match="uniform"):
        parse_config(with_(model={"kind": "chern2d", "L": 20}, pre={"profile": [1.0] * 20}))
    with pytest.raises(ConfigInvalid, match="Ly"):
        parse_config(with_(model={"kind": "chain1d", "L": 20, "Ly": 3}))


def test_field_level_messages():
    with pytest.raises(ConfigInvalid) as err:
        parse_config(with_(time={"max": -1.0, "steps": 1}))
    assert {"time.max", "time.steps"} <= set(err.value.errors)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigInvalid, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\nkind=1")
    with pytest.raises(ConfigInvalid, match="TOML"):
        load_config(bad)


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        '[model]\nkind = "chain1d"\nL = 12\n[pre]\nmass = 1.5\n[post]\nmass = 0.3\n'
        "[subsystem]\nlength = 4\n[time]\nmax = 2.0\nsteps = 10\n"
    )
    cfg = load_config(path)
    assert isinstance(cfg, Config) and cfg.time.steps == 10
