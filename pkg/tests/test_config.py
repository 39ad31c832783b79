import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasefield.config import (ConfigError, config_hash, default_config, dumps_config, loads_config,
                               parse_seed_crack, study_config)


def test_defaults_round_trip():
    cfg = default_config()
    assert loads_config(dumps_config(cfg)) == cfg


@given(st.floats(0.01, 0.5), st.lists(st.floats(1e-3, 0.2), min_size=1, max_size=5), st.sampled_from([1, 2]))
def test_round_trip_is_identity(delta, eps, dim):
    cfg = loads_config(f"[profile]\ndelta = {delta!r}\n[schedule]\ndim = {dim}\neps = {eps!r}\n")
    again = loads_config(dumps_config(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_partial_override_and_int_promotion():
    cfg = loads_config("[energy]\ngc = 2\n")
    assert cfg["energy"]["gc"] == 2.0 and isinstance(cfg["energy"]["gc"], float)
    assert cfg["profile"] == default_config()["profile"]


@pytest.mark.parametrize("text", ["[nope]\na = 1\n", "[energy]\nfoo = 1\n", "[energy]\ngc = 'hard'\n",
                                  "profile = 3\n", "[energy\n", "[schedule]\ndim = true\n"])
def test_invalid(text):
    with pytest.raises(ConfigError):
        loads_config(text)


def test_semantic_validation():
    cfg = loads_config("[schedule]\neta_exp = 0.5\n")
    with pytest.raises(ConfigError):
        study_config(cfg)
    assert study_config(default_config()).dim == 2


def test_hash_stable_and_sensitive():
    a, b = default_config(), default_config()
    assert config_hash(a) == config_hash(b)
    b["energy"]["gc"] = 3.0
    assert config_hash(a) != config_hash(b)
    assert len(config_hash(a)) == 64


@pytest.mark.parametrize("text,expected", [("x2=0.5,0.0,1.0", (1, 0.5, 0.0, 1.0)), ("x1=0.3", (0, 0.3, 0.0, 1.0)),
                                           ("X2=0.5,0.25,0.75", (1, 0.5, 0.25, 0.75))])
def test_seed_crack(text, expected):
    assert parse_seed_crack(text) == expected


@pytest.mark.parametrize("text", ["y=0.5", "x2", "x2=0.5,0.7,0.2", "x2=a,b,c", "x2=0.5,0.1"])
def test_seed_crack_invalid(text):
    with pytest.raises(ConfigError):
        parse_seed_crack(text)
