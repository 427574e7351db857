"""Profile defaults, config parsing, annealing schedule, seed streams."""

import numpy as np
import pytest

from cpvae import config
from cpvae.errors import ParseError, UsageError


def test_yelp_profile_values():
    c = config.profile_config("yelp")
    assert c.n_basis == 3 and c.alpha == 100.0
    assert c.z1_dim == 16 and c.z2_dim == 64
    assert c.enc_hidden == 1024 and c.dec_hidden == 1024
    assert c.dec_emb_dim == 128
    assert c.beta1 == 0.2 and c.beta2 == 0.35


def test_agnews_profile_values():
    c = config.profile_config("agnews")
    assert c.n_basis == 10 and c.alpha == 10.0
    assert c.z1_dim == 32 and c.z2_dim == 96
    assert (c.anneal_start, c.anneal_end, c.anneal_epochs) == (0.1, 1.0, 10)


def test_unknown_profile():
    with pytest.raises(UsageError):
        config.profile_config("imdb")


def test_kl_weight_schedule():
    c = config.profile_config("agnews")
    assert abs(c.kl_weight(0) - 0.1) < 1e-12
    assert abs(c.kl_weight(5) - 0.55) < 1e-12
    assert abs(c.kl_weight(10) - 1.0) < 1e-12
    assert abs(c.kl_weight(25) - 1.0) < 1e-12
    flat = config.profile_config("yelp")
    assert flat.kl_weight(0) == flat.kl_weight(99) == 0.35


def test_parse_config_overrides_profile(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nalpha = 42.5\nbatch_size=8\n\n")
    c = config.parse_config(p, profile="yelp")
    assert c.alpha == 42.5 and c.batch_size == 8
    assert c.n_basis == 3  # untouched profile default


def test_parse_config_unknown_key_named(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("learning_rate=3\n")
    with pytest.raises(ParseError, match="learning_rate"):
        config.parse_config(p)


def test_parse_config_type_error(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("batch_size=many\n")
    with pytest.raises(ParseError, match="batch_size"):
        config.parse_config(p)


def test_parse_config_missing_separator(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("alpha 10\n")
    with pytest.raises(ParseError, match="line 1"):
        config.parse_config(p)


def test_empty_file_equals_profile(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("")
    assert config.parse_config(p, profile="toy") == config.profile_config("toy")


def test_validate_rejects_k_above_z1():
    with pytest.raises(UsageError):
        config.parse_config(None, overrides={"n_basis": 9, "z1_dim": 4})


def test_validate_rejects_bad_patience():
    with pytest.raises(UsageError):
        config.parse_config(None, overrides={"patience": 0})


def test_streams_reproducible_and_distinct():
    a1 = config.stream(7, "noise").normal(size=4)
    a2 = config.stream(7, "noise").normal(size=4)
    b = config.stream(7, "shuffle").normal(size=4)
    c = config.stream(8, "noise").normal(size=4)
    np.testing.assert_array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert not np.array_equal(a1, c)
