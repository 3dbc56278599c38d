"""Config parsing: dotted keys, overrides, strict key registry."""

import pytest

from gammact.config import ConfigError, RunConfig, apply_override, parse_config


def test_defaults():
    cfg = RunConfig()
    assert cfg.seed is None
    assert cfg.n_views == 36
    assert cfg.n_detectors == 5
    assert cfg.fan_angle == 13.25
    assert cfg.filters == ("h99", "h91", "h75", "h54", "h50")


def test_parse_basic_and_comments():
    cfg = parse_config(
        "# comment\n"
        "seed=7\n"
        "detector.lld0 = 0.4\n"
        "\n"
        "geometry.n_views=72\n"
    )
    assert cfg.seed == 7
    assert cfg.lld0 == 0.4
    assert cfg.n_views == 72


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config("detector.lld=1\ndetectorr.lld=1\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_override(RunConfig(), "bogus", "1")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("just some words\n")


def test_bad_value_names_the_key():
    with pytest.raises(ConfigError, match="seed"):
        apply_override(RunConfig(), "seed", "abc")


def test_list_valued_keys():
    cfg = RunConfig()
    apply_override(cfg, "recon.filters", "h50, h75")
    assert cfg.filters == ("h50", "h75")
    apply_override(cfg, "sweep.hv", "650 750,850")
    assert cfg.sweep_hv == (650.0, 750.0, 850.0)


def test_bool_values():
    cfg = RunConfig()
    apply_override(cfg, "verify.break_filter_table", "true")
    assert cfg.break_filter_table is True
    apply_override(cfg, "verify.break_filter_table", "0")
    assert cfg.break_filter_table is False
    with pytest.raises(ConfigError, match="boolean"):
        apply_override(cfg, "verify.break_filter_table", "maybe")


def test_override_on_top_of_file():
    base = parse_config("seed=1\nrepeats=50\n")
    cfg = parse_config("repeats=80\n", base)
    assert cfg.seed == 1
    assert cfg.repeats == 80
