"""On-disk formats: feature sequences, raw EEG, WAV audio, manifests,
model checkpoints, and report/curve files.

All binary containers are little-endian. Tensor payloads are 32-bit floats.
"""
from __future__ import annotations

import csv
import struct
import wave
from pathlib import Path

import numpy as np

from .core import SignalRecord, default_channel_labels
from .errors import DimensionError, FormatError
from .features import FeatureSequence, Modality
from .kpca import KernelSpec, KpcaModel
from .nn import ClassifierParams, DenseParams, GruLayerParams, TcnLayerParams

FSEQ_MAGIC = b"FSEQ"
EEG_MAGIC = b"EEGR"
CHECKPOINT_MAGIC = b"NSPK"
KPCA_MAGIC = b"KPCA"
FORMAT_VERSION = 1

_KERNEL_CODES = {"linear": 0, "poly": 1, "rbf": 2}
_KERNEL_NAMES = {v: k for k, v in _KERNEL_CODES.items()}


# ---------------------------------------------------------------- FSEQ files

def write_fseq(path: Path | str, seq: FeatureSequence) -> None:
    """magic 'FSEQ', version u16, modality u8, rate_hz u16, T u32, D u32,
    then T*D float32 row-major."""
    frames = np.ascontiguousarray(seq.frames, dtype="<f4")
    t, d = frames.shape
    with open(path, "wb") as fh:
        fh.write(FSEQ_MAGIC)
        fh.write(struct.pack("<HBHII", FORMAT_VERSION, int(seq.modality), seq.rate_hz, t, d))
        fh.write(frames.tobytes())


def read_fseq(path: Path | str, utterance_id: str = "") -> FeatureSequence:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FSEQ_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {FSEQ_MAGIC!r}")
        header = fh.read(struct.calcsize("<HBHII"))
        if len(header) != struct.calcsize("<HBHII"):
            raise FormatError(f"{path}: truncated header")
        version, modality_code, rate_hz, t, d = struct.unpack("<HBHII", header)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        try:
            modality = Modality(modality_code)
        except ValueError as exc:
            raise FormatError(f"{path}: unknown modality code {modality_code}") from exc
        payload = fh.read(4 * t * d)
        if len(payload) != 4 * t * d:
            raise FormatError(f"{path}: truncated payload")
        frames = np.frombuffer(payload, dtype="<f4").reshape(t, d)
    return FeatureSequence(frames, rate_hz, modality, utterance_id)


def write_fseq_csv(path: Path | str, seq: FeatureSequence) -> None:
    """Optional CSV export; header row is the dimension indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"d{i}" for i in range(seq.dim)])
        for row in seq.frames:
            writer.writerow([f"{v:.7g}" for v in row])


# ------------------------------------------------------------- raw EEG files

def write_eeg(path: Path | str, record: SignalRecord) -> None:
    """magic 'EEGR', version u16, channels u16, sample_rate u32,
    float32 samples channel-major."""
    samples = np.ascontiguousarray(record.samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(EEG_MAGIC)
        fh.write(struct.pack("<HHI", FORMAT_VERSION, record.channels, int(record.sample_rate_hz)))
        fh.write(samples.tobytes())


def read_eeg(path: Path | str) -> SignalRecord:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != EEG_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {EEG_MAGIC!r}")
        header = fh.read(struct.calcsize("<HHI"))
        if len(header) != struct.calcsize("<HHI"):
            raise FormatError(f"{path}: truncated header")
        version, channels, rate = struct.unpack("<HHI", header)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        payload = fh.read()
    if channels == 0 or len(payload) % (4 * channels):
        raise FormatError(f"{path}: payload is not a whole number of {channels}-channel samples")
    samples = np.frombuffer(payload, dtype="<f4").reshape(channels, -1)
    return SignalRecord(rate, samples, default_channel_labels(channels))


# ------------------------------------------------------------------ WAV audio

def write_wav(path: Path | str, record: SignalRecord) -> None:
    """PCM-16 mono; float samples are clipped to [-1, 1]."""
    if record.channels != 1:
        raise DimensionError(f"WAV writer expects mono audio, got {record.channels} channels")
    clipped = np.clip(record.samples[0], -1.0, 1.0)
    pcm = (clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(record.sample_rate_hz))
        fh.writeframes(pcm.tobytes())


def read_wav(path: Path | str) -> SignalRecord:
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getsampwidth() != 2 or fh.getnchannels() != 1:
                raise FormatError(f"{path}: expected PCM-16 mono")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a WAV file ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    return SignalRecord(rate, samples[None, :], ("mono",))


# ------------------------------------------------------------------ manifests

MANIFEST_COLUMNS = ("utterance_id", "speaker_label", "audio_path", "eeg_path")


def write_manifest(path: Path | str, rows: list[tuple[str, str, str, str]]) -> None:
    """CSV of (utterance_id, speaker_label, audio_path, eeg_path); paths are
    relative to the manifest's directory."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)


def read_manifest(path: Path | str) -> list[dict[str, str]]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_COLUMNS:
            raise FormatError(
                f"{path}: manifest columns {reader.fieldnames} != {list(MANIFEST_COLUMNS)}"
            )
        return list(reader)


def speaker_index(rows: list[dict[str, str]]) -> dict[str, int]:
    """Dense speaker ids assigned by first appearance in the manifest."""
    index: dict[str, int] = {}
    for row in rows:
        label = row["speaker_label"]
        if label not in index:
            index[label] = len(index)
    return index


# ------------------------------------------------- named-tensor container i/o

def _write_tensor(fh, name: str, array: np.ndarray) -> None:
    encoded = name.encode()
    data = np.ascontiguousarray(array, dtype="<f4")
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<B", data.ndim))
    for dim in data.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(data.tobytes())


def _read_tensors(fh, path) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    while True:
        head = fh.read(2)
        if not head:
            return tensors
        if len(head) != 2:
            raise FormatError(f"{path}: truncated tensor name length")
        (name_len,) = struct.unpack("<H", head)
        name = fh.read(name_len).decode()
        rank_bytes = fh.read(1)
        if len(rank_bytes) != 1:
            raise FormatError(f"{path}: truncated tensor rank for {name!r}")
        (rank,) = struct.unpack("<B", rank_bytes)
        dims = []
        for _ in range(rank):
            dims.append(struct.unpack("<I", fh.read(4))[0])
        count = int(np.prod(dims)) if dims else 1
        payload = fh.read(4 * count)
        if len(payload) != 4 * count:
            raise FormatError(f"{path}: truncated tensor data for {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims)
    # unreachable


# ----------------------------------------------------------- model checkpoint

def write_checkpoint(
    path: Path | str,
    params: ClassifierParams,
    extra_tensors: dict[str, np.ndarray] | None = None,
    adam: "object | None" = None,
) -> None:
    """magic 'NSPK', version u16, config block (input_dim u32, n_speakers u32,
    tcn_width u32), then named float32 tensors to end of file. Adam state, when
    given, is appended as 'adam.*' tensors."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(
            struct.pack(
                "<HIII", FORMAT_VERSION, params.input_dim, params.n_speakers, params.tcn.width
            )
        )
        for name, arr in params.named_arrays():
            _write_tensor(fh, name, arr)
        for name, arr in (extra_tensors or {}).items():
            _write_tensor(fh, name, arr)
        if adam is not None:
            _write_tensor(fh, "adam.step", np.array(float(adam.step)))
            _write_tensor(fh, "adam.lr", np.array(adam.lr))
            _write_tensor(fh, "adam.beta1", np.array(adam.beta1))
            _write_tensor(fh, "adam.beta2", np.array(adam.beta2))
            _write_tensor(fh, "adam.epsilon", np.array(adam.epsilon))
            for name, arr in adam.m.items():
                _write_tensor(fh, f"adam.m.{name}", arr)
            for name, arr in adam.v.items():
                _write_tensor(fh, f"adam.v.{name}", arr)


def read_checkpoint(path: Path | str):
    """Returns (params, extra tensors, header dict). Weights come back float32."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        header = fh.read(struct.calcsize("<HIII"))
        if len(header) != struct.calcsize("<HIII"):
            raise FormatError(f"{path}: truncated header")
        version, input_dim, n_speakers, tcn_width = struct.unpack("<HIII", header)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        tensors = _read_tensors(fh, path)
    required = [
        "tcn.kernels", "tcn.biases",
        "gru.w_update", "gru.w_reset", "gru.w_cand",
        "gru.b_update", "gru.b_reset", "gru.b_cand",
        "dense.weights", "dense.biases",
    ]
    missing = [name for name in required if name not in tensors]
    if missing:
        raise FormatError(f"{path}: checkpoint missing tensors {missing}")
    params = ClassifierParams(
        tcn=TcnLayerParams(tensors["tcn.kernels"].copy(), tensors["tcn.biases"].copy()),
        gru=GruLayerParams(
            tensors["gru.w_update"].copy(), tensors["gru.w_reset"].copy(),
            tensors["gru.w_cand"].copy(), tensors["gru.b_update"].copy(),
            tensors["gru.b_reset"].copy(), tensors["gru.b_cand"].copy(),
        ),
        dense=DenseParams(tensors["dense.weights"].copy(), tensors["dense.biases"].copy()),
    )
    if params.input_dim != input_dim or params.n_speakers != n_speakers:
        raise FormatError(f"{path}: header dims disagree with tensor shapes")
    extras = {k: v.copy() for k, v in tensors.items() if k not in required}
    header_info = {"input_dim": input_dim, "n_speakers": n_speakers, "tcn_width": tcn_width}
    return params, extras, header_info


# ------------------------------------------------------------- KPCA container

def write_kpca_model(path: Path | str, model: KpcaModel) -> None:
    """magic 'KPCA', version u16, kind u8, degree u32, coef0 f64, gamma f64
    (NaN when unset), then named float32 tensors."""
    gamma = float("nan") if model.kernel.gamma is None else model.kernel.gamma
    with open(path, "wb") as fh:
        fh.write(KPCA_MAGIC)
        fh.write(
            struct.pack(
                "<HBIdd",
                FORMAT_VERSION,
                _KERNEL_CODES[model.kernel.kind],
                model.kernel.degree,
                model.kernel.coef0,
                gamma,
            )
        )
        _write_tensor(fh, "support_vectors", model.support_vectors)
        _write_tensor(fh, "alphas", model.alphas)
        _write_tensor(fh, "eigenvalues", model.eigenvalues)
        _write_tensor(fh, "row_means", model.row_means)
        _write_tensor(fh, "total_mean", np.array(model.total_mean))
        _write_tensor(fh, "total_positive_mass", np.array(model.total_positive_mass))


def read_kpca_model(path: Path | str) -> KpcaModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != KPCA_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {KPCA_MAGIC!r}")
        head = fh.read(struct.calcsize("<HBIdd"))
        if len(head) != struct.calcsize("<HBIdd"):
            raise FormatError(f"{path}: truncated header")
        version, kind_code, degree, coef0, gamma = struct.unpack("<HBIdd", head)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if kind_code not in _KERNEL_NAMES:
            raise FormatError(f"{path}: unknown kernel code {kind_code}")
        tensors = _read_tensors(fh, path)
    spec = KernelSpec(
        kind=_KERNEL_NAMES[kind_code],
        degree=degree,
        coef0=coef0,
        gamma=None if np.isnan(gamma) else gamma,
    )
    try:
        return KpcaModel(
            support_vectors=tensors["support_vectors"].astype(np.float64),
            kernel=spec,
            alphas=tensors["alphas"].astype(np.float64),
            eigenvalues=tensors["eigenvalues"].astype(np.float64),
            row_means=tensors["row_means"].astype(np.float64),
            total_mean=tensors["total_mean"].item(),
            total_positive_mass=tensors["total_positive_mass"].item(),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: model missing tensor {exc}") from exc


# ------------------------------------------------------------ reports & plots

def write_curves_csv(path: Path | str, curves: list[tuple[int, float, float]]) -> None:
    """Per-epoch accuracy curves: (epoch, train_accuracy, val_accuracy)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_accuracy", "val_accuracy"])
        for epoch, train_acc, val_acc in curves:
            writer.writerow([epoch, f"{train_acc:.6f}", f"{val_acc:.6f}"])


def write_explained_variance_csv(path: Path | str, fractions: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component_index", "cumulative_fraction"])
        for i, frac in enumerate(fractions):
            writer.writerow([i, f"{frac:.6f}"])


def write_artifact_report_csv(path: Path | str, rows: list[tuple]) -> None:
    """Audit log: (utterance_id, component, kurtosis, lowfreq_ratio, max_amp_z, rejected)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["utterance_id", "component", "kurtosis", "lowfreq_ratio", "max_amplitude_z", "rejected"]
        )
        for utt_id, comp, kurt, ratio, z, rejected in rows:
            writer.writerow(
                [utt_id, comp, f"{kurt:.4f}", f"{ratio:.4f}", f"{z:.4f}", int(rejected)]
            )


def render_curves_svg(path: Path | str, curves: list[tuple[int, float, float]]) -> None:
    """Minimal deterministic SVG line plot of the accuracy curves."""
    width, height, margin = 640, 400, 45
    n = max(len(curves), 1)

    def sx(epoch_idx):
        return margin + (width - 2 * margin) * (epoch_idx / max(n - 1, 1))

    def sy(acc):
        return height - margin - (height - 2 * margin) * acc

    def polyline(values, color):
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(values))
        return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'

    train = [row[1] for row in curves]
    val = [row[2] for row in curves]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        polyline(train, "#1f77b4"),
        polyline(val, "#d62728"),
        f'<text x="{margin}" y="{margin - 12}" font-size="12">'
        "train (blue) / validation (red) accuracy per epoch</text>",
        "</svg>",
    ]
    Path(path).write_text("\n".join(parts))


def format_percent(fraction: float) -> str:
    return f"{fraction * 100.0:.2f}"


def write_comparison_table(
    txt_path: Path | str, csv_path: Path | str, accuracies: dict[str, float]
) -> None:
    """Three-column accuracy table (MFCC, EEG, MFCC+EEG), percent, 2 decimals."""
    columns = ["MFCC", "EEG", "MFCC+EEG"]
    values = [format_percent(accuracies[c]) for c in columns]
    header = " | ".join(f"{c:>10}" for c in columns)
    line = " | ".join(f"{v:>10}" for v in values)
    Path(txt_path).write_text(
        header + "\n" + "-" * len(header) + "\n" + line + "\n"
    )
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerow(values)
