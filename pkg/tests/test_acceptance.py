"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured value (run with ``pytest tests/test_acceptance.py -v -s``).

The published accuracy tables came from private human recordings and are NOT
reproducible here; they enter only as metric-arithmetic checks. Everything
else is validated on synthetic corpora whose ground truth is known by
construction.
"""
import hashlib
import time
from pathlib import Path

import numpy as np

from neurospeaker import dsp, ica, kpca, nn, pipeline
from neurospeaker.cli import main as cli_main
from neurospeaker.core import make_rng
from neurospeaker.features import Modality
from neurospeaker.fileio import format_percent
from neurospeaker.synth import SynthSpec

from test_dsp import find_minus_3db, oracle_response
from test_ica import best_assignment_correlations, record, three_source_instance
from test_kpca import pca_oracle_projections, sign_align
from test_nn import finite_difference_check, random_instance


def report(name: str, detail: str):
    print(f"\nACCEPTANCE PASS {name}: {detail}")


class TestMetricArithmetic:
    """Tables 45.56/43.33/56.11 and 25.69/59.72/26.39 as k/180 and k/144
    rationals, exact to two decimals; the values themselves are non-reproducible
    references tied to private corpora."""

    def test_published_accuracies_are_test_count_rationals(self):
        assert format_percent(101 / 180) == "56.11"
        assert format_percent(82 / 180) == "45.56"
        assert format_percent(78 / 180) == "43.33"
        assert format_percent(86 / 144) == "59.72"
        assert format_percent(37 / 144) == "25.69"
        assert format_percent(38 / 144) == "26.39"
        report("metric-arithmetic", "101/180=56.11%, 86/144=59.72% (exact to 2 decimals)")

    def test_readme_states_non_reproducibility(self):
        readme = (Path(__file__).resolve().parents[1] / "README.md").read_text()
        assert "not reproducible" in readme.lower()
        report("non-reproducibility-statement", "README documents the private-data caveat")


class TestGradientCorrectness:
    def test_composed_finite_difference_20_seeds(self):
        start = time.perf_counter()
        worst = 0.0
        for seed in range(20):
            params, x, lengths, labels = random_instance(seed, t=7, input_dim=5, n_classes=3)
            worst = max(worst, finite_difference_check(params, x, lengths, labels, h=1e-4))
        elapsed = time.perf_counter() - start
        assert worst < 1e-4
        assert elapsed < 30.0
        report("gradient-correctness", f"worst rel err {worst:.2e} over 20 seeds in {elapsed:.1f}s")


class TestDspCriteria:
    def test_bandpass_edges_and_notch_depth(self):
        start = time.perf_counter()
        bp = dsp.design_bandpass(4, 0.1, 70.0, 1000.0)
        low = find_minus_3db(bp, 0.02, 0.5, 1000.0)
        high = find_minus_3db(bp, 40.0, 95.0, 1000.0)
        assert abs(low - 0.1) / 0.1 < 0.05
        assert abs(high - 70.0) / 70.0 < 0.05
        notch = dsp.design_notch(60.0, 30.0, 1000.0)
        depth_db = 20 * np.log10(max(oracle_response(notch, [60.0], 1000.0)[0], 1e-30))
        assert depth_db <= -30.0
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        report(
            "dsp-design",
            f"-3dB at {low:.4f}/{high:.2f} Hz, notch {depth_db:.0f} dB, {elapsed:.2f}s",
        )


class TestKpcaOracle:
    def test_linear_kernel_matches_pca_on_100_instances(self):
        start = time.perf_counter()
        worst = 0.0
        for seed in range(100):
            x = make_rng(seed).standard_normal((50, 10))
            model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=10)
            projections = kpca.training_projections(model)
            oracle = pca_oracle_projections(x, 10)
            worst = max(worst, float(np.max(np.abs(sign_align(oracle, projections) - oracle))))
        elapsed = time.perf_counter() - start
        assert worst < 1e-6
        assert elapsed < 10.0
        report("kpca-pca-equivalence", f"worst |dev| {worst:.1e} on 100 instances in {elapsed:.1f}s")


class TestIcaOracle:
    def test_three_source_recovery_10_seeds(self):
        start = time.perf_counter()
        worst = 1.0
        for seed in range(10):
            sources, mixing, rng = three_source_instance(seed)
            mixed = record(mixing @ sources)
            model = ica.fit_ica(mixed, rng=rng)
            comps = ica.sources(model, mixed).samples
            worst = min(worst, float(best_assignment_correlations(sources, comps).min()))
        elapsed = time.perf_counter() - start
        assert worst >= 0.95
        assert elapsed < 30.0
        report("ica-recovery", f"worst best-assignment |corr| {worst:.4f} over 10 seeds in {elapsed:.1f}s")


class TestDimensionContracts:
    def test_constants_and_dense_width(self):
        from neurospeaker.features import EEG_CHANNELS, EEG_FEATURES_PER_CHANNEL

        assert EEG_CHANNELS * EEG_FEATURES_PER_CHANNEL == 155
        assert Modality.EEG155.dim == 155
        assert Modality.EEG30.dim == 30
        assert Modality.MFCC13.dim == 13
        assert Modality.FUSED43.dim == 43 == 13 + 30
        for n_speakers in (4, 8):
            pipeline.check_dimension_contracts(n_speakers)
            params = nn.init_classifier(
                43, n_speakers, make_rng(0), tcn_filters=8, tcn_width=3, gru_hidden=8
            )
            assert params.dense.n_out == n_speakers
        report("dimension-contracts", "155=31x5, KPCA 30, MFCC 13, fused 43, dense = {4, 8}")


class TestEndToEndLearnability:
    def test_separable_then_chance_corpus_under_ten_minutes(self):
        start = time.perf_counter()
        separable = SynthSpec(
            n_speakers=4, utterances_per_speaker=50, duration_s=2.0,
            separability=1.0, noise_db=-40.0, seed=11,
        )
        result = pipeline.run_experiment(
            separable,
            modalities=(Modality.FUSED43,),
            config=pipeline.TrainConfig(epochs=300, seed=11),
        )
        accuracy = result.reports[Modality.FUSED43].test_accuracy
        curves = result.results[Modality.FUSED43].curves
        assert accuracy >= 0.95
        assert curves[-1][1] >= curves[0][1]  # learning happened

        # an unlearnable corpus cannot leave chance level no matter how long
        # it trains; 50 epochs keeps the combined run inside the budget
        chance_spec = SynthSpec(
            n_speakers=4, utterances_per_speaker=50, duration_s=2.0,
            separability=0.0, noise_db=-40.0, seed=13,
        )
        chance = pipeline.run_experiment(
            chance_spec,
            modalities=(Modality.FUSED43,),
            config=pipeline.TrainConfig(epochs=50, seed=13),
        )
        chance_acc = chance.reports[Modality.FUSED43].test_accuracy
        assert abs(chance_acc - 0.25) <= 0.1

        elapsed = time.perf_counter() - start
        assert elapsed < 600.0
        report(
            "end-to-end-learnability",
            f"separable acc {accuracy:.3f} (300 epochs), chance acc {chance_acc:.3f}, "
            f"combined {elapsed:.0f}s",
        )


class TestNoiseRobustnessSign:
    def test_eeg_beats_mfcc_under_heavy_audio_noise(self):
        results = []
        for seed in (1, 2, 3):
            spec = SynthSpec(
                n_speakers=4, utterances_per_speaker=20, duration_s=1.0,
                separability=1.0, noise_db=20.0, seed=seed,
            )
            out = pipeline.run_experiment(
                spec,
                modalities=(Modality.MFCC13, Modality.EEG30),
                config=pipeline.TrainConfig(epochs=80, seed=seed),
            )
            mfcc_acc = out.reports[Modality.MFCC13].test_accuracy
            eeg_acc = out.reports[Modality.EEG30].test_accuracy
            assert eeg_acc > mfcc_acc, f"seed {seed}: EEG {eeg_acc} vs MFCC {mfcc_acc}"
            results.append((seed, mfcc_acc, eeg_acc))
        detail = "; ".join(f"seed {s}: EEG {e:.2f} > MFCC {m:.2f}" for s, m, e in results)
        report("noisy-audio-sign", detail)


class TestDeterminism:
    def test_two_experiment_runs_byte_identical(self, tmp_path):
        args = [
            "--seed", "31",
            "--set", "synth.utterances_per_speaker=4",
            "--set", "synth.duration_s=0.8",
            "--set", "kpca.max_fit_frames=500",
            "--set", "train.epochs=5",
        ]

        def digest(root: Path):
            out = {}
            for path in sorted(root.rglob("*")):
                if path.is_file():
                    out[str(path.relative_to(root))] = hashlib.sha256(
                        path.read_bytes()
                    ).hexdigest()
            return out

        a, b = tmp_path / "a", tmp_path / "b"
        assert cli_main(["experiment", "--out", str(a), *args]) == 0
        assert cli_main(["experiment", "--out", str(b), *args]) == 0
        digests_a, digests_b = digest(a), digest(b)
        assert digests_a == digests_b
        assert any(name.endswith(".nspk") for name in digests_a)
        report(
            "determinism",
            f"{len(digests_a)} files (reports, curves, checkpoints) byte-identical across reruns",
        )
