import hashlib
from pathlib import Path

import pytest

from neurospeaker import fileio, nn
from neurospeaker.cli import main
from neurospeaker.core import make_rng

TINY = [
    "--set", "synth.utterances_per_speaker=3",
    "--set", "synth.duration_s=0.6",
    "--set", "kpca.max_fit_frames=400",
]


def tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


@pytest.fixture(scope="module")
def staged(tmp_path_factory):
    """One corpus driven through every stage; shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    clean = root / "clean"
    feats = root / "feats"
    assert main(["synth", "--out", str(corpus), "--seed", "21", *TINY]) == 0
    assert main(["preprocess", "--in", str(corpus), "--out", str(clean), "--seed", "21", *TINY]) == 0
    assert main(["features", "--in", str(clean), "--out", str(feats), "--seed", "21", *TINY]) == 0
    assert main(["kpca", "--features", str(feats), "--seed", "21", *TINY]) == 0
    return root, corpus, clean, feats


class TestSynth:
    def test_file_count_is_two_per_utterance_plus_manifest(self, staged):
        _, corpus, _, _ = staged
        files = [p for p in corpus.rglob("*") if p.is_file()]
        assert len(files) == 12 * 2 + 1

    def test_rerun_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["--seed", "4", "--set", "synth.utterances_per_speaker=2",
                "--set", "synth.duration_s=0.5"]
        assert main(["synth", "--out", str(a), *args]) == 0
        assert main(["synth", "--out", str(b), *args]) == 0
        assert tree_digest(a) == tree_digest(b)

    def test_unwritable_destination_exits_2(self):
        assert main(["synth", "--out", "/dev/null/nope", "--seed", "1"]) == 2


class TestStages:
    def test_preprocess_outputs(self, staged):
        _, _, clean, _ = staged
        assert (clean / "manifest.csv").exists()
        assert (clean / "artifact_report.csv").exists()
        rows = fileio.read_manifest(clean / "manifest.csv")
        assert len(rows) == 12
        record = fileio.read_eeg(clean / rows[0]["eeg_path"])
        assert record.channels == 31

    def test_kpca_outputs_thirty_components(self, staged):
        _, _, _, feats = staged
        lines = (feats / "explained_variance.csv").read_text().strip().splitlines()
        assert len(lines) == 31  # header + 30 component rows
        model = fileio.read_kpca_model(feats / "kpca_model.kpca")
        assert model.n_components == 30

    def test_train_then_eval(self, staged, tmp_path):
        _, _, _, feats = staged
        run = tmp_path / "run"
        assert main([
            "train", "--features", str(feats), "--out", str(run),
            "--modality", "FUSED43", "--seed", "21", "--set", "train.epochs=6", "--svg",
        ]) == 0
        assert (run / "checkpoint.nspk").exists()
        assert (run / "curves.csv").exists()
        assert (run / "curves.svg").read_text().startswith("<svg")
        out = tmp_path / "eval"
        assert main([
            "eval", "--checkpoint", str(run / "checkpoint.nspk"),
            "--features", str(feats), "--out", str(out), "--seed", "21",
        ]) == 0
        report = (out / "report.txt").read_text()
        assert "test accuracy:" in report
        assert "%" in report

    def test_eval_speaker_count_mismatch_exits_3(self, staged, tmp_path):
        _, _, _, feats = staged
        bogus = nn.init_classifier(43, 8, make_rng(0), tcn_filters=4, tcn_width=3, gru_hidden=4)
        path = tmp_path / "bogus.nspk"
        fileio.write_checkpoint(path, bogus)
        assert main(["eval", "--checkpoint", str(path), "--features", str(feats), "--seed", "21"]) == 3

    def test_train_without_kpca_stage_exits_3(self, tmp_path):
        corpus, clean, feats = tmp_path / "c", tmp_path / "cl", tmp_path / "f"
        args = ["--seed", "3", "--set", "synth.utterances_per_speaker=2", "--set", "synth.duration_s=0.5"]
        assert main(["synth", "--out", str(corpus), *args]) == 0
        assert main(["preprocess", "--in", str(corpus), "--out", str(clean), *args]) == 0
        assert main(["features", "--in", str(clean), "--out", str(feats), *args]) == 0
        code = main(["train", "--features", str(feats), "--out", str(tmp_path / "r"),
                     "--modality", "EEG30", "--seed", "3", "--set", "train.epochs=1"])
        assert code == 3


class TestExitCodes:
    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_unknown_config_key_exits_3(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "x"), "--set", "no.such=1"]) == 1 + 2

    def test_missing_input_exits_2(self, tmp_path):
        assert main(["preprocess", "--in", str(tmp_path / "void"), "--out", str(tmp_path / "o")]) == 2

    def test_numeric_errors_exit_4(self, monkeypatch):
        from neurospeaker import cli
        from neurospeaker.errors import NumericError

        def boom(args):
            raise NumericError("NaN in gradients")

        monkeypatch.setitem(cli.COMMANDS, "synth", boom)
        assert main(["synth", "--out", "whatever"]) == 4


class TestExperimentCommand:
    def test_emits_table_and_reruns_identically(self, tmp_path):
        args = [
            "--seed", "17",
            "--set", "synth.utterances_per_speaker=3",
            "--set", "synth.duration_s=0.6",
            "--set", "kpca.max_fit_frames=400",
            "--set", "train.epochs=4",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["experiment", "--out", str(a), *args]) == 0
        table = (a / "table.txt").read_text().splitlines()
        assert [c.strip() for c in table[0].split("|")] == ["MFCC", "EEG", "MFCC+EEG"]
        assert (a / "table.csv").exists()
        for tag in ("mfcc13", "eeg30", "fused43"):
            assert (a / f"checkpoint_{tag}.nspk").exists()
            assert (a / f"curves_{tag}.csv").exists()
        assert main(["experiment", "--out", str(b), *args]) == 0
        assert tree_digest(a) == tree_digest(b)
