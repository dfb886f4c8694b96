"""Flat key=value run configuration with section prefixes.

Every tunable in the package appears in the registry below together with its
default and provenance: ``published`` marks values fixed by the reported setup,
``decision`` marks values this implementation had to choose. Unknown keys are
rejected; command-line ``--set`` overrides file values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .features import MfccConfig, Modality
from .ica import ArtifactThresholds
from .kpca import KernelSpec
from .pipeline import DspConfig, IcaConfig, KpcaConfig, TrainConfig
from .synth import SynthSpec


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_modality(text: str) -> Modality:
    try:
        return Modality[text.strip().upper()]
    except KeyError:
        raise ValueError(
            f"not a modality: {text!r} (choose from {', '.join(m.name for m in Modality)})"
        )


def _parse_epochs(text: str):
    if text.strip().lower() in ("auto", "none", ""):
        return None
    return int(text)


@dataclass(frozen=True)
class ConfigKey:
    name: str
    parse: callable
    default: object
    provenance: str  # "published" or "decision"
    help: str


REGISTRY: tuple[ConfigKey, ...] = (
    ConfigKey("seed", int, 0, "decision", "root seed; every stage derives from it"),
    # synthetic corpus
    ConfigKey("synth.n_speakers", int, 4, "published", "speakers in the corpus (datasets had 4 and 8)"),
    ConfigKey("synth.utterances_per_speaker", int, 50, "decision", "utterances generated per speaker"),
    ConfigKey("synth.duration_s", float, 2.0, "decision", "utterance duration in seconds"),
    ConfigKey("synth.separability", float, 1.0, "decision", "speaker signature distance; 0 = chance-level corpus"),
    ConfigKey("synth.noise_db", float, -40.0, "decision", "audio noise level relative to speech (dB)"),
    # dsp
    ConfigKey("dsp.bandpass_order", int, 4, "published", "IIR band-pass order"),
    ConfigKey("dsp.bandpass_low_hz", float, 0.1, "published", "band-pass low cutoff"),
    ConfigKey("dsp.bandpass_high_hz", float, 70.0, "published", "band-pass high cutoff"),
    ConfigKey("dsp.notch_hz", float, 60.0, "published", "power-line notch center"),
    ConfigKey("dsp.notch_q", float, 30.0, "decision", "notch quality factor"),
    ConfigKey("dsp.frame_length", int, 100, "decision", "EEG feature window (samples at 1 kHz)"),
    ConfigKey("dsp.hop_length", int, 10, "published", "EEG feature hop; realizes the 100 Hz feature rate"),
    # ica
    ConfigKey("ica.max_iter", int, 200, "decision", "FastICA iteration cap"),
    ConfigKey("ica.tol", float, 1e-5, "decision", "FastICA convergence tolerance"),
    ConfigKey("ica.kurtosis_threshold", float, 15.0, "decision", "reject |excess kurtosis| above this"),
    ConfigKey("ica.lowfreq_ratio_threshold", float, 0.7, "decision", "reject low-frequency power ratio above this"),
    ConfigKey("ica.lowfreq_cutoff_hz", float, 3.0, "decision", "low-frequency band edge for the ratio"),
    ConfigKey("ica.max_amplitude_z_threshold", float, 8.0, "decision", "reject max-amplitude z-score above this"),
    # features
    ConfigKey("features.normalize", _parse_bool, True, "decision", "z-score features with training statistics"),
    ConfigKey("features.mfcc_window_ms", float, 25.0, "decision", "MFCC analysis window"),
    ConfigKey("features.mfcc_fft_size", int, 512, "decision", "MFCC FFT size"),
    ConfigKey("features.mfcc_filters", int, 26, "decision", "mel filter count"),
    ConfigKey("features.mfcc_preemphasis", float, 0.97, "decision", "pre-emphasis coefficient"),
    # kpca
    ConfigKey("kpca.kernel", str, "poly", "decision", "kernel kind: linear, poly, or rbf"),
    ConfigKey("kpca.degree", int, 3, "decision", "polynomial kernel degree"),
    ConfigKey("kpca.coef0", float, 1.0, "decision", "polynomial kernel offset"),
    ConfigKey("kpca.gamma", float, 0.0, "decision", "rbf width; 0 means 1/dim"),
    ConfigKey("kpca.n_components", int, 30, "published", "reduced EEG feature dimension"),
    ConfigKey("kpca.max_fit_frames", int, 2000, "decision", "training frames used to fit the kernel matrix"),
    # nn / train
    ConfigKey("nn.tcn_filters", int, 128, "published", "TCN filter count"),
    ConfigKey("nn.tcn_width", int, 3, "decision", "TCN causal kernel width"),
    ConfigKey("nn.gru_hidden", int, 128, "published", "GRU hidden units"),
    ConfigKey("train.epochs", _parse_epochs, None, "published", "epochs; auto = 300 (500 for 8 speakers)"),
    ConfigKey("train.batch_size", int, 100, "published", "mini-batch size"),
    ConfigKey("train.validation_fraction", float, 0.1, "published", "validation split knob (used when carving)"),
    ConfigKey("train.carve_validation_from_train", _parse_bool, False, "decision", "carve validation from train instead of the reserved partition"),
    ConfigKey("train.modality", _parse_modality, Modality.FUSED43, "decision", "feature stream to train on"),
    ConfigKey("train.learning_rate", float, 1e-3, "decision", "Adam learning rate (the optimizer's canonical default)"),
    ConfigKey("train.beta1", float, 0.9, "decision", "Adam beta1"),
    ConfigKey("train.beta2", float, 0.999, "decision", "Adam beta2"),
    ConfigKey("train.epsilon", float, 1e-8, "decision", "Adam epsilon"),
    # pipeline
    ConfigKey("pipeline.parallel", _parse_bool, False, "decision", "thread per-utterance preprocessing/features"),
)

_BY_NAME = {key.name: key for key in REGISTRY}


@dataclass
class RunConfig:
    """Every tunable, resolved and validated."""

    values: dict[str, object] = field(default_factory=dict)

    def __getitem__(self, name: str):
        return self.values[name]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def synth_spec(self, **overrides) -> SynthSpec:
        kwargs = dict(
            n_speakers=self.values["synth.n_speakers"],
            utterances_per_speaker=self.values["synth.utterances_per_speaker"],
            duration_s=self.values["synth.duration_s"],
            separability=self.values["synth.separability"],
            noise_db=self.values["synth.noise_db"],
            seed=self.values["seed"],
        )
        kwargs.update(overrides)
        return SynthSpec(**kwargs)

    def dsp_config(self) -> DspConfig:
        return DspConfig(
            bandpass_order=self.values["dsp.bandpass_order"],
            bandpass_low_hz=self.values["dsp.bandpass_low_hz"],
            bandpass_high_hz=self.values["dsp.bandpass_high_hz"],
            notch_hz=self.values["dsp.notch_hz"],
            notch_q=self.values["dsp.notch_q"],
            frame_length=self.values["dsp.frame_length"],
            hop_length=self.values["dsp.hop_length"],
        )

    def ica_config(self) -> IcaConfig:
        return IcaConfig(
            max_iter=self.values["ica.max_iter"],
            tol=self.values["ica.tol"],
            thresholds=ArtifactThresholds(
                kurtosis=self.values["ica.kurtosis_threshold"],
                lowfreq_ratio=self.values["ica.lowfreq_ratio_threshold"],
                lowfreq_cutoff_hz=self.values["ica.lowfreq_cutoff_hz"],
                max_amplitude_z=self.values["ica.max_amplitude_z_threshold"],
            ),
        )

    def mfcc_config(self) -> MfccConfig:
        return MfccConfig(
            window_ms=self.values["features.mfcc_window_ms"],
            fft_size=self.values["features.mfcc_fft_size"],
            n_filters=self.values["features.mfcc_filters"],
            preemphasis=self.values["features.mfcc_preemphasis"],
        )

    def kpca_config(self) -> KpcaConfig:
        gamma = self.values["kpca.gamma"]
        kernel = KernelSpec(
            kind=self.values["kpca.kernel"],
            degree=self.values["kpca.degree"],
            coef0=self.values["kpca.coef0"],
            gamma=None if gamma == 0.0 else gamma,
        )
        return KpcaConfig(
            kernel=kernel,
            n_components=self.values["kpca.n_components"],
            max_fit_frames=self.values["kpca.max_fit_frames"],
        )

    def train_config(self, **overrides) -> TrainConfig:
        kwargs = dict(
            epochs=self.values["train.epochs"],
            batch_size=self.values["train.batch_size"],
            validation_fraction=self.values["train.validation_fraction"],
            carve_validation_from_train=self.values["train.carve_validation_from_train"],
            modality=self.values["train.modality"],
            seed=self.values["seed"],
            learning_rate=self.values["train.learning_rate"],
            beta1=self.values["train.beta1"],
            beta2=self.values["train.beta2"],
            epsilon=self.values["train.epsilon"],
            tcn_filters=self.values["nn.tcn_filters"],
            tcn_width=self.values["nn.tcn_width"],
            gru_hidden=self.values["nn.gru_hidden"],
            normalize=self.values["features.normalize"],
        )
        kwargs.update(overrides)
        return TrainConfig(**kwargs)

    @property
    def parallel(self) -> bool:
        return self.values["pipeline.parallel"]


def parse_assignment(line: str) -> tuple[str, str]:
    if "=" not in line:
        raise ConfigError(f"expected key=value, got {line!r}")
    key, _, value = line.partition("=")
    return key.strip(), value.strip()


def load_config(
    path: Path | str | None = None, overrides: list[str] | None = None
) -> RunConfig:
    """Merge defaults, an optional config file, and --set overrides.

    Rejects unknown keys and bad values before any computation starts.
    """
    values = {key.name: key.default for key in REGISTRY}

    def apply(name: str, raw: str, origin: str):
        key = _BY_NAME.get(name)
        if key is None:
            raise ConfigError(f"{origin}: unknown config key {name!r}")
        try:
            values[name] = key.parse(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{origin}: bad value for {name}: {exc}") from exc

    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            name, raw = parse_assignment(stripped)
            apply(name, raw, f"{path}:{lineno}")
    for item in overrides or []:
        name, raw = parse_assignment(item)
        apply(name, raw, "--set")
    config = RunConfig(values)
    # Construct every sub-config now so contradictions surface immediately.
    config.synth_spec()
    config.dsp_config()
    config.ica_config()
    config.mfcc_config()
    config.kpca_config()
    config.train_config()
    return config


def registry_help() -> str:
    lines = ["configuration keys (default, provenance):"]
    for key in REGISTRY:
        default = key.default
        if isinstance(default, Modality):
            default = default.name
        lines.append(f"  {key.name} = {default}  [{key.provenance}] {key.help}")
    return "\n".join(lines)
