import pytest

from protosynth.config import RunConfig, SynthConfig
from protosynth.exceptions import ConfigurationError


def test_defaults():
    config = SynthConfig()
    assert config.timeout_seconds == 3600.0
    assert config.state_budget == 1_000_000
    assert config.candidate_budget is None
    assert config.workers == 1
    assert not (config.no_pruning or config.no_reduction or config.exact_stut or config.no_deadlock)


def test_from_options_ignores_unset():
    """Test options left at None keep their defaults"""
    config = SynthConfig.from_options(timeout_seconds=None, workers=4, candidate_budget=None)
    assert config.workers == 4
    assert config.timeout_seconds == 3600.0


def test_from_options_rejects_unknown_settings():
    with pytest.raises(ConfigurationError, match="Unknown settings: colour"):
        SynthConfig.from_options(colour="red")


@pytest.mark.parametrize("overrides", [
    {"timeout_seconds": 0},
    {"state_budget": 0},
    {"candidate_budget": 0},
    {"workers": 0},
    {"verbosity": -1},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigurationError):
        SynthConfig.from_options(**overrides)


def test_run_config_modes():
    RunConfig("x.sketch", mode="check").validate()
    with pytest.raises(ConfigurationError, match="Invalid mode"):
        RunConfig("x.sketch", mode="verify").validate()
    with pytest.raises(ConfigurationError, match="Invalid output"):
        RunConfig("x.sketch", output="yaml").validate()


@pytest.mark.parametrize("flag", ["no_pruning", "no_reduction", "exact_stut"])
def test_search_flags_only_in_synth_mode(flag):
    """Test search ablations are refused outside synth mode"""
    synth = SynthConfig(**{flag: True})
    RunConfig("x.sketch", mode="synth", synth=synth).validate()
    with pytest.raises(ConfigurationError, match="only apply to synth mode"):
        RunConfig("x.sketch", mode="check", synth=synth).validate()


def test_enumerate_classes_settings():
    with pytest.raises(ConfigurationError):
        RunConfig("x.sketch", mode="enumerate-classes", interps=-1).validate()
    with pytest.raises(ConfigurationError):
        RunConfig("x.sketch", mode="enumerate-classes", oracle_depth=0).validate()


def test_run_config_validates_nested_settings():
    with pytest.raises(ConfigurationError):
        RunConfig("x.sketch", synth=SynthConfig(workers=0)).validate()
