import pytest

from neurospeaker.config import load_config, registry_help
from neurospeaker.errors import ConfigError
from neurospeaker.features import Modality


def test_defaults_match_published_settings():
    config = load_config()
    assert config["dsp.bandpass_order"] == 4
    assert config["dsp.bandpass_low_hz"] == 0.1
    assert config["dsp.bandpass_high_hz"] == 70.0
    assert config["dsp.notch_hz"] == 60.0
    assert config["kpca.n_components"] == 30
    assert config["nn.tcn_filters"] == 128
    assert config["nn.gru_hidden"] == 128
    assert config["train.batch_size"] == 100
    assert config["train.validation_fraction"] == 0.1
    assert config["train.epochs"] is None  # auto: 300, or 500 for 8 speakers


def test_file_values_and_overrides(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(
        "# comment line\n"
        "seed=99\n"
        "dsp.notch_q=25\n"
        "train.modality=eeg30\n"
        "\n"
    )
    config = load_config(path, overrides=["dsp.notch_q=40"])
    assert config.seed == 99
    assert config["dsp.notch_q"] == 40.0  # --set wins over the file
    assert config["train.modality"] is Modality.EEG30


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("dsp.unknown_thing=1\n")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(overrides=["nope=2"])


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides=["train.epochs=many"])
    with pytest.raises(ConfigError):
        load_config(overrides=["features.normalize=perhaps"])
    with pytest.raises(ConfigError):
        load_config(overrides=["train.modality=OGG"])


def test_missing_assignment_rejected(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("just a line\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_contradictory_values_surface_at_parse_time():
    with pytest.raises(Exception):
        load_config(overrides=["dsp.bandpass_low_hz=90", "dsp.bandpass_high_hz=70"])
    with pytest.raises(Exception):
        load_config(overrides=["synth.n_speakers=1"])


def test_registry_help_lists_provenance():
    text = registry_help()
    assert "dsp.notch_q" in text
    assert "[published]" in text and "[decision]" in text
    # every key documented
    from neurospeaker.config import REGISTRY

    for key in REGISTRY:
        assert key.name in text


def test_epochs_auto_parses():
    assert load_config(overrides=["train.epochs=auto"])["train.epochs"] is None
    assert load_config(overrides=["train.epochs=250"])["train.epochs"] == 250


def test_subconfig_construction():
    config = load_config(overrides=["kpca.kernel=rbf", "kpca.gamma=0.5"])
    kc = config.kpca_config()
    assert kc.kernel.kind == "rbf"
    assert kc.kernel.gamma == 0.5
    tc = config.train_config()
    assert tc.batch_size == 100
    spec = config.synth_spec()
    assert spec.n_speakers == 4
