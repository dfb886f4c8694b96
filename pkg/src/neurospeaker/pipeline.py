"""End-to-end orchestration: preprocessing, dataset assembly, training,
evaluation, and the three-modality comparison experiment.

Runs are deterministic: every stochastic step draws from a generator derived
from the root seed and a stage label, and training is single-threaded. The
optional parallel mode only fans out per-utterance preprocessing and feature
extraction, whose results are order-independent.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dsp, ica, kpca, nn
from .core import LabeledDataset, SignalRecord, derive_rng, split_dataset
from .errors import DimensionError, InputError
from .features import (
    EEG_CHANNELS,
    EEG_FEATURES_PER_CHANNEL,
    FeatureSequence,
    FeatureStats,
    MfccConfig,
    Modality,
    compute_feature_stats,
    extract_eeg_features,
    extract_mfcc,
    fuse,
    normalize_features,
)
from .synth import SynthSpec, Utterance, generate_synthetic


@dataclass
class DspConfig:
    bandpass_order: int = 4
    bandpass_low_hz: float = 0.1
    bandpass_high_hz: float = 70.0
    notch_hz: float = 60.0
    notch_q: float = 30.0
    frame_length: int = 100
    hop_length: int = 10

    def __post_init__(self):
        if not 0 < self.bandpass_low_hz < self.bandpass_high_hz:
            raise InputError(
                f"band-pass cutoffs must satisfy 0 < low < high, got "
                f"{self.bandpass_low_hz}..{self.bandpass_high_hz}"
            )
        if self.notch_hz <= 0 or self.notch_q <= 0:
            raise InputError("notch frequency and quality must be positive")
        self.frame_spec  # validates frame/hop relationship

    @property
    def frame_spec(self) -> dsp.FrameSpec:
        return dsp.FrameSpec(self.frame_length, self.hop_length)


@dataclass
class IcaConfig:
    max_iter: int = 200
    tol: float = 1e-5
    thresholds: ica.ArtifactThresholds = field(default_factory=ica.ArtifactThresholds)


@dataclass
class KpcaConfig:
    kernel: kpca.KernelSpec = field(default_factory=kpca.KernelSpec)
    n_components: int = 30
    max_fit_frames: int = 2000


@dataclass
class TrainConfig:
    """Training hyperparameters. ``epochs=None`` resolves to 300, or 500 for
    8-speaker datasets."""

    epochs: int | None = None
    batch_size: int = 100
    validation_fraction: float = 0.1
    carve_validation_from_train: bool = False
    modality: Modality = Modality.FUSED43
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    tcn_filters: int = 128
    tcn_width: int = 3
    gru_hidden: int = 128
    normalize: bool = True

    def __post_init__(self):
        if self.epochs is not None and self.epochs <= 0:
            raise InputError(f"epochs must be positive, got {self.epochs}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise InputError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )
        if self.batch_size < 1:
            raise InputError(f"batch_size must be >= 1, got {self.batch_size}")

    def resolve_epochs(self, n_speakers: int) -> int:
        if self.epochs is not None:
            return self.epochs
        return 500 if n_speakers == 8 else 300


@dataclass
class EvalReport:
    test_accuracy: float
    confusion_matrix: np.ndarray  # (n_speakers, n_speakers) counts, rows = truth
    curves: list[tuple[int, float, float]]

    @property
    def n_test(self) -> int:
        return int(self.confusion_matrix.sum())

    def accuracy_percent(self) -> str:
        from .fileio import format_percent

        return format_percent(self.test_accuracy)


@dataclass
class TrainResult:
    params: nn.ClassifierParams
    curves: list[tuple[int, float, float]]
    stats: FeatureStats | None
    adam: nn.AdamState


def check_dimension_contracts(
    n_speakers: int,
    kpca_components: int = 30,
    mfcc_dim: int = 13,
) -> None:
    """The arithmetic the whole pipeline is built on; asserted on every run."""
    if EEG_CHANNELS * EEG_FEATURES_PER_CHANNEL != Modality.EEG155.dim:
        raise DimensionError(
            f"{EEG_CHANNELS} channels x {EEG_FEATURES_PER_CHANNEL} features "
            f"!= {Modality.EEG155.dim}"
        )
    if kpca_components != Modality.EEG30.dim:
        raise DimensionError(f"KPCA must emit {Modality.EEG30.dim} dims, got {kpca_components}")
    if mfcc_dim != Modality.MFCC13.dim:
        raise DimensionError(f"MFCC must emit {Modality.MFCC13.dim} dims, got {mfcc_dim}")
    if Modality.MFCC13.dim + Modality.EEG30.dim != Modality.FUSED43.dim:
        raise DimensionError("fusion dims are inconsistent")
    if n_speakers < 2:
        raise DimensionError(f"need at least 2 speakers, got {n_speakers}")


def _check_split_isolation(dataset: LabeledDataset) -> None:
    seen: dict[str, str] = {}
    for (seq, _), tag in zip(dataset.items, dataset.partition):
        if seq.utterance_id in seen and seen[seq.utterance_id] != tag:
            raise InputError(
                f"utterance {seq.utterance_id!r} appears in partitions "
                f"{seen[seq.utterance_id]!r} and {tag!r}"
            )
        seen[seq.utterance_id] = tag


def _map_utterances(worker, utterances, parallel: bool):
    if parallel:
        with ThreadPoolExecutor() as pool:
            return list(pool.map(worker, utterances))
    return [worker(u) for u in utterances]


def preprocess_eeg(
    utterances: list[Utterance],
    config: DspConfig = DspConfig(),
    ica_config: IcaConfig = IcaConfig(),
    seed: int = 0,
    parallel: bool = False,
) -> tuple[list[Utterance], list[tuple]]:
    """Band-pass, notch, and ICA artifact removal per utterance.

    Returns cleaned utterances plus artifact-report rows for the audit log.
    """
    if not utterances:
        raise InputError("no utterances to preprocess")
    rate = utterances[0].eeg.sample_rate_hz
    bandpass = dsp.design_bandpass(
        config.bandpass_order, config.bandpass_low_hz, config.bandpass_high_hz, rate
    )
    notch = dsp.design_notch(config.notch_hz, config.notch_q, rate)

    def worker(utt: Utterance):
        filtered = dsp.apply_filter(notch, dsp.apply_filter(bandpass, utt.eeg))
        rng = derive_rng(seed, f"ica.{utt.utterance_id}")
        model = ica.fit_ica(
            filtered, max_iter=ica_config.max_iter, tol=ica_config.tol, rng=rng
        )
        comps = ica.sources(model, filtered)
        report = ica.score_and_reject(model, comps, ica_config.thresholds)
        cleaned = ica.reconstruct_clean(model, comps, report)
        cleaned_record = SignalRecord(
            utt.eeg.sample_rate_hz, cleaned.samples, utt.eeg.channel_labels
        )
        rows = [(utt.utterance_id, *row) for row in report.rows()]
        return replace(utt, eeg=cleaned_record), rows

    results = _map_utterances(worker, utterances, parallel)
    cleaned = [r[0] for r in results]
    report_rows = [row for r in results for row in r[1]]
    return cleaned, report_rows


def extract_features(
    utterances: list[Utterance],
    dsp_config: DspConfig = DspConfig(),
    mfcc_config: MfccConfig = MfccConfig(),
    parallel: bool = False,
) -> dict[str, dict[str, FeatureSequence]]:
    """Per-utterance MFCC13 and EEG155 sequences keyed by utterance id."""

    def worker(utt: Utterance):
        mfcc = extract_mfcc(utt.audio, mfcc_config, utterance_id=utt.utterance_id)
        eeg155 = extract_eeg_features(
            utt.eeg, dsp_config.frame_spec, utterance_id=utt.utterance_id
        )
        return utt.utterance_id, {"mfcc13": mfcc, "eeg155": eeg155}

    return dict(_map_utterances(worker, utterances, parallel))


def reduce_eeg(
    features: dict[str, dict[str, FeatureSequence]],
    train_ids: list[str],
    config: KpcaConfig = KpcaConfig(),
    seed: int = 0,
) -> kpca.KpcaModel:
    """Fit KPCA on standardized training EEG155 frames and add EEG30 streams.

    Features are z-scored (training statistics) before the kernel so no
    single raw feature scale dominates; the same transform is applied to all
    partitions.
    """
    train_seqs = [features[i]["eeg155"] for i in train_ids]
    stats = compute_feature_stats(train_seqs)
    pooled = np.concatenate(
        [normalize_features(stats, s).frames for s in train_seqs], axis=0
    ).astype(np.float64)
    if pooled.shape[0] > config.max_fit_frames:
        rng = derive_rng(seed, "kpca.subsample")
        pick = np.sort(rng.choice(pooled.shape[0], size=config.max_fit_frames, replace=False))
        pooled = pooled[pick]
    model = kpca.fit_kpca(pooled, config.kernel, config.n_components)
    for utt_id, streams in features.items():
        normalized = normalize_features(stats, streams["eeg155"])
        reduced = kpca.transform_frames(model, normalized.frames.astype(np.float64))
        streams["eeg30"] = FeatureSequence(
            reduced, streams["eeg155"].rate_hz, Modality.EEG30, utt_id
        )
    return model


def modality_sequence(streams: dict[str, FeatureSequence], modality: Modality) -> FeatureSequence:
    if modality is Modality.MFCC13:
        return streams["mfcc13"]
    if modality is Modality.EEG155:
        return streams["eeg155"]
    if modality is Modality.EEG30:
        return streams["eeg30"]
    if modality is Modality.FUSED43:
        return fuse(streams["mfcc13"], streams["eeg30"])
    raise InputError(f"unsupported modality {modality}")


def assemble_dataset(
    features: dict[str, dict[str, FeatureSequence]],
    speakers: dict[str, int],
    modality: Modality,
    seed: int = 0,
    ratios=(0.8, 0.1, 0.1),
) -> LabeledDataset:
    """Build the labelled dataset for one modality with a seeded split."""
    items = []
    for utt_id in sorted(features):
        seq = modality_sequence(features[utt_id], modality)
        items.append((seq, speakers[utt_id]))
    rng = derive_rng(seed, "split")
    dataset = split_dataset(items, ratios, rng)
    _check_split_isolation(dataset)
    return dataset


def batch_count(n_items: int, batch_size: int) -> int:
    return math.ceil(n_items / batch_size)


def _accuracy_on(
    params: nn.ClassifierParams,
    items: list[tuple[FeatureSequence, int]],
    batch_size: int,
) -> float:
    if not items:
        return float("nan")
    correct = 0
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        x, lengths = nn.pad_batch(
            [s.frames for s, _ in chunk], dtype=params.tcn.kernels.dtype
        )
        probs, _, _ = nn.forward_batch(params, x, lengths)
        preds = np.argmax(probs, axis=1)
        correct += int(np.sum(preds == np.array([label for _, label in chunk])))
    return correct / len(items)


def train(
    dataset: LabeledDataset, config: TrainConfig = TrainConfig()
) -> TrainResult:
    """Mini-batch Adam training with per-epoch train/validation accuracy curves.

    The validation curve uses the dataset's reserved validation partition by
    default; ``carve_validation_from_train`` instead carves
    ``validation_fraction`` off the shuffled training items.
    """
    check_dimension_contracts(dataset.n_speakers)
    _check_split_isolation(dataset)
    train_items = dataset.subset("train")
    if not train_items:
        raise InputError("dataset has no training items")
    val_items = dataset.subset("val")

    if config.carve_validation_from_train:
        rng_carve = derive_rng(config.seed, "train.carve")
        order = rng_carve.permutation(len(train_items))
        n_val = max(1, int(round(config.validation_fraction * len(train_items))))
        val_items = [train_items[i] for i in order[:n_val]]
        train_items = [train_items[i] for i in order[n_val:]]
        if not train_items:
            raise InputError("validation carve-out consumed every training item")

    modality = train_items[0][0].modality
    if modality is not config.modality:
        raise DimensionError(
            f"dataset modality {modality.name} != configured {config.modality.name}"
        )

    stats = None
    if config.normalize:
        stats = compute_feature_stats([s for s, _ in train_items])
        train_items = [(normalize_features(stats, s), y) for s, y in train_items]
        val_items = [(normalize_features(stats, s), y) for s, y in val_items]

    rng_init = derive_rng(config.seed, "train.init")
    params = nn.init_classifier(
        modality.dim,
        dataset.n_speakers,
        rng_init,
        tcn_filters=config.tcn_filters,
        tcn_width=config.tcn_width,
        gru_hidden=config.gru_hidden,
        dtype=np.float32,
    )
    adam = nn.adam_init(
        params,
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )

    sequences = [np.asarray(s.frames, dtype=np.float32) for s, _ in train_items]
    labels = np.array([y for _, y in train_items], dtype=np.int64)
    rng_shuffle = derive_rng(config.seed, "train.shuffle")
    epochs = config.resolve_epochs(dataset.n_speakers)
    curves: list[tuple[int, float, float]] = []
    for epoch in range(1, epochs + 1):
        order = rng_shuffle.permutation(len(sequences))
        correct = 0
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            x, lengths = nn.pad_batch([sequences[i] for i in batch_idx])
            batch_labels = labels[batch_idx]
            probs, _, cache = nn.forward_batch(params, x, lengths, batch_labels)
            correct += int(np.sum(np.argmax(probs, axis=1) == batch_labels))
            grads = nn.backward(cache, params)
            nn.adam_step(params, grads, adam)
        train_acc = correct / len(sequences)
        val_acc = _accuracy_on(params, val_items, config.batch_size)
        curves.append((epoch, train_acc, val_acc))
    return TrainResult(params=params, curves=curves, stats=stats, adam=adam)


def evaluate(
    params: nn.ClassifierParams,
    dataset: LabeledDataset,
    stats: FeatureStats | None = None,
    curves: list[tuple[int, float, float]] | None = None,
    batch_size: int = 100,
) -> EvalReport:
    """Argmax classification of the test partition (ties resolve to the
    lowest class index); accuracy is correct/total."""
    test_items = dataset.subset("test")
    if not test_items:
        raise InputError("dataset has no test items")
    if stats is not None:
        test_items = [(normalize_features(stats, s), y) for s, y in test_items]
    n = dataset.n_speakers
    if params.n_speakers != n:
        raise DimensionError(
            f"checkpoint has {params.n_speakers} speakers, dataset has {n}"
        )
    confusion = np.zeros((n, n), dtype=np.int64)
    for start in range(0, len(test_items), batch_size):
        chunk = test_items[start : start + batch_size]
        x, lengths = nn.pad_batch(
            [s.frames for s, _ in chunk], dtype=params.tcn.kernels.dtype
        )
        probs, _, _ = nn.forward_batch(params, x, lengths)
        preds = np.argmax(probs, axis=1)
        for (_, truth), pred in zip(chunk, preds):
            confusion[truth, pred] += 1
    accuracy = float(np.trace(confusion)) / len(test_items)
    return EvalReport(
        test_accuracy=accuracy,
        confusion_matrix=confusion,
        curves=list(curves or []),
    )


MODALITY_COLUMNS = {
    Modality.MFCC13: "MFCC",
    Modality.EEG30: "EEG",
    Modality.FUSED43: "MFCC+EEG",
}


@dataclass
class ExperimentResult:
    accuracies: dict[str, float]  # column name -> test accuracy fraction
    reports: dict[Modality, EvalReport]
    results: dict[Modality, TrainResult]
    kpca_model: kpca.KpcaModel
    speakers: dict[str, int]


def run_experiment(
    spec: SynthSpec,
    modalities: tuple[Modality, ...] = (Modality.MFCC13, Modality.EEG30, Modality.FUSED43),
    config: TrainConfig = TrainConfig(),
    dsp_config: DspConfig = DspConfig(),
    ica_config: IcaConfig = IcaConfig(),
    kpca_config: KpcaConfig = KpcaConfig(),
    parallel: bool = False,
    utterances: list[Utterance] | None = None,
) -> ExperimentResult:
    """Train one model per modality on identical splits and seeds.

    Mirrors the published comparison: a three-column table of test accuracy
    for MFCC-only, EEG-only, and fused features.
    """
    check_dimension_contracts(spec.n_speakers, kpca_config.n_components)
    if utterances is None:
        utterances = generate_synthetic(spec)
    speakers = {u.utterance_id: u.speaker for u in utterances}
    cleaned, _ = preprocess_eeg(utterances, dsp_config, ica_config, config.seed, parallel)
    features = extract_features(cleaned, dsp_config, parallel=parallel)

    # The split must be identical for every modality: derive it once from ids.
    ids = sorted(features)
    id_items = [(features[i]["eeg155"], speakers[i]) for i in ids]
    probe = split_dataset(id_items, rng=derive_rng(config.seed, "split"))
    train_ids = [ids[i] for i in probe.indices("train")]

    kpca_model = reduce_eeg(features, train_ids, kpca_config, config.seed)

    reports: dict[Modality, EvalReport] = {}
    results: dict[Modality, TrainResult] = {}
    accuracies: dict[str, float] = {}
    for modality in modalities:
        dataset = assemble_dataset(features, speakers, modality, config.seed)
        run_config = replace(config, modality=modality)
        result = train(dataset, run_config)
        report = evaluate(result.params, dataset, result.stats, result.curves)
        reports[modality] = report
        results[modality] = result
        accuracies[MODALITY_COLUMNS.get(modality, modality.name)] = report.test_accuracy
    return ExperimentResult(
        accuracies=accuracies,
        reports=reports,
        results=results,
        kpca_model=kpca_model,
        speakers=speakers,
    )
