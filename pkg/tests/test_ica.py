import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.signal import sawtooth

from neurospeaker import ica
from neurospeaker.core import SignalRecord, default_channel_labels, make_rng
from neurospeaker.errors import DegenerateInputError, InputError

FS = 1000.0


def record(samples, fs=FS):
    samples = np.atleast_2d(samples)
    return SignalRecord(fs, samples, default_channel_labels(samples.shape[0]))


def best_assignment_correlations(true_sources, estimated):
    n = true_sources.shape[0]
    corr = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            corr[i, j] = abs(np.corrcoef(true_sources[i], estimated[j])[0, 1])
    rows, cols = linear_sum_assignment(-corr)
    return corr[rows, cols]


class TestWhiten:
    def test_output_covariance_is_identity(self):
        rng = make_rng(0)
        mixing = rng.standard_normal((4, 4))
        x = mixing @ rng.standard_normal((4, 5000))
        _, whitened = ica.whiten(record(x))
        cov = np.cov(whitened.samples, bias=True)
        np.testing.assert_allclose(cov, np.eye(4), atol=1e-6)
        np.testing.assert_allclose(whitened.samples.mean(axis=1), 0.0, atol=1e-9)

    def test_covariance_eigenvalues_are_unit(self):
        rng = make_rng(1)
        x = rng.standard_normal((5, 3000)) * np.array([[1.0], [2.0], [0.5], [3.0], [1.5]])
        _, whitened = ica.whiten(record(x))
        cov = whitened.samples @ whitened.samples.T / whitened.samples.shape[1]
        eigvals = np.linalg.eigvalsh(cov)
        np.testing.assert_allclose(eigvals, 1.0, atol=1e-6)

    def test_already_white_input_stays_white(self):
        rng = make_rng(2)
        x = rng.standard_normal((3, 8000))
        _, whitened = ica.whiten(record(x))
        cov = whitened.samples @ whitened.samples.T / x.shape[1]
        np.testing.assert_allclose(cov, np.eye(3), atol=1e-6)

    def test_perfectly_correlated_channels_rejected(self):
        rng = make_rng(3)
        base = rng.standard_normal(2000)
        x = np.vstack([base, 2.0 * base, rng.standard_normal(2000)])
        with pytest.raises(DegenerateInputError) as err:
            ica.whiten(record(x))
        assert "ch00" in str(err.value) and "ch01" in str(err.value)

    def test_needs_two_channels(self):
        with pytest.raises(InputError):
            ica.whiten(record(np.zeros((1, 100))))


def three_source_instance(seed, n=4000):
    rng = make_rng(seed)
    t = np.arange(n) / FS
    sources = np.vstack(
        [
            np.sin(2 * np.pi * 13.7 * t),
            sawtooth(2 * np.pi * 7.3 * t),
            rng.uniform(-1.0, 1.0, size=n),
        ]
    )
    mixing = rng.standard_normal((3, 3))
    while np.linalg.cond(mixing) > 10.0:
        mixing = rng.standard_normal((3, 3))
    return sources, mixing, rng


class TestFastIca:
    def test_two_source_recovery(self):
        rng = make_rng(0)
        t = np.arange(4000) / FS
        sources = np.vstack([np.sin(2 * np.pi * 9.1 * t), sawtooth(2 * np.pi * 4.3 * t)])
        mixing = np.array([[1.0, 0.6], [0.4, 1.0]])
        mixed = record(mixing @ sources)
        model = ica.fit_ica(mixed, rng=rng)
        comps = ica.sources(model, mixed).samples
        matched = best_assignment_correlations(sources, comps)
        assert np.all(matched >= 0.95)

    def test_independent_white_input_gives_signed_permutation(self):
        rng = make_rng(4)
        sources = np.vstack(
            [
                rng.uniform(-1, 1, size=6000),
                np.sign(rng.standard_normal(6000)),
                sawtooth(2 * np.pi * 11.3 * np.arange(6000) / FS),
            ]
        )
        sources = (sources - sources.mean(axis=1, keepdims=True)) / sources.std(axis=1, keepdims=True)
        whitened = record(sources)
        model = ica.fit_fastica(whitened, rng=rng)
        w = np.abs(model.unmixing_matrix)
        # each row and column should carry a single ~1 entry
        assert np.all(np.sort(w, axis=1)[:, -1] > 0.97)
        assert np.all(np.sort(w, axis=1)[:, :-1].sum(axis=1) < 0.25)
        assert np.all(np.sort(w, axis=0)[-1, :] > 0.97)

    def test_unmixing_rows_orthonormal(self):
        sources, mixing, rng = three_source_instance(5)
        model = ica.fit_ica(record(mixing @ sources), rng=rng)
        gram = model.unmixing_matrix @ model.unmixing_matrix.T
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-6)

    def test_deterministic_given_seed(self):
        sources, mixing, _ = three_source_instance(6)
        x = record(mixing @ sources)
        a = ica.fit_ica(x, rng=make_rng(123)).unmixing_matrix
        b = ica.fit_ica(x, rng=make_rng(123)).unmixing_matrix
        np.testing.assert_array_equal(a, b)

    def test_n_components_cannot_exceed_channels(self):
        sources, mixing, rng = three_source_instance(7)
        _, whitened = ica.whiten(record(mixing @ sources))
        with pytest.raises(InputError):
            ica.fit_fastica(whitened, n_components=4, rng=rng)


class TestScoring:
    def _report(self, component, fs=FS, thresholds=ica.ArtifactThresholds()):
        comps = record(component, fs)
        model = ica.IcaModel(
            whitening_matrix=np.eye(comps.channels),
            dewhitening_matrix=np.eye(comps.channels),
            mean_vector=np.zeros(comps.channels),
            n_components=comps.channels,
            unmixing_matrix=np.eye(comps.channels),
        )
        return ica.score_and_reject(model, comps, thresholds)

    def test_gaussian_noise_not_rejected(self):
        noise = make_rng(0).standard_normal(4000)
        report = self._report(noise)
        assert abs(report.kurtosis[0]) < 1.0
        assert report.rejected == frozenset()

    def test_sparse_spike_train_rejected_by_kurtosis(self):
        rng = make_rng(1)
        component = np.zeros(4000)
        spikes = rng.choice(4000, size=40, replace=False)
        component[spikes] = rng.standard_normal(40) * 5.0 + 10.0
        # population excess kurtosis of a 1%-sparse train is ~1/p - 3 >> 15
        report = self._report(component)
        assert report.kurtosis[0] > 15.0
        assert 0 in report.rejected

    def test_slow_wave_rejected_by_lowfreq_ratio(self):
        t = np.arange(4000) / FS
        slow = np.sin(2 * np.pi * 0.5 * t)
        report = self._report(slow)
        assert report.lowfreq_ratio[0] > 0.7
        assert 0 in report.rejected

    def test_burst_rejected_by_amplitude_z(self):
        rng = make_rng(2)
        component = rng.standard_normal(4000) * 0.1
        component[2000] = 25.0
        report = self._report(component, thresholds=ica.ArtifactThresholds(kurtosis=1e9))
        assert report.max_amplitude_z[0] > 8.0
        assert 0 in report.rejected

    def test_summary_lists_every_component(self):
        rng = make_rng(3)
        report = self._report(rng.standard_normal((3, 2000)))
        assert len(report.summary().splitlines()) == 4


class TestReconstruct:
    def test_round_trip_when_nothing_rejected(self):
        sources, mixing, rng = three_source_instance(8)
        x = record(mixing @ sources + 1.5)
        model = ica.fit_ica(x, rng=rng)
        comps = ica.sources(model, x)
        report = ica.ArtifactReport(
            kurtosis=np.zeros(3), lowfreq_ratio=np.zeros(3),
            max_amplitude_z=np.zeros(3), rejected=frozenset(),
        )
        restored = ica.reconstruct_clean(model, comps, report)
        err = np.linalg.norm(restored.samples - x.samples) / np.linalg.norm(x.samples)
        assert err < 1e-6

    def test_rejecting_everything_leaves_channel_means(self):
        sources, mixing, rng = three_source_instance(9)
        x = record(mixing @ sources + np.array([[1.0], [2.0], [3.0]]))
        model = ica.fit_ica(x, rng=rng)
        comps = ica.sources(model, x)
        report = ica.ArtifactReport(
            kurtosis=np.zeros(3), lowfreq_ratio=np.zeros(3),
            max_amplitude_z=np.zeros(3), rejected=frozenset({0, 1, 2}),
        )
        restored = ica.reconstruct_clean(model, comps, report)
        expected = np.tile(x.samples.mean(axis=1, keepdims=True), (1, x.samples.shape[1]))
        np.testing.assert_allclose(restored.samples, expected, atol=1e-9)

    def test_artifact_injection_cleanup(self):
        # blink-like sparse artifact mixed into an EEG-like background; after
        # rejection the cleaned channels should match the pre-injection signal
        rng = make_rng(10)
        n = 6000
        t = np.arange(n) / FS
        clean_sources = np.vstack(
            [
                np.sin(2 * np.pi * 9.0 * t),
                sawtooth(2 * np.pi * 5.7 * t),
                rng.uniform(-1, 1, size=n),
            ]
        )
        artifact = np.zeros(n)
        starts = rng.choice(n - 40, size=6, replace=False)
        for s in starts:
            artifact[s : s + 40] += 60.0 * np.hanning(40)
        mixing = rng.standard_normal((4, 4))
        while np.linalg.cond(mixing) > 10.0:
            mixing = rng.standard_normal((4, 4))
        all_sources = np.vstack([clean_sources, artifact])
        clean_signal = mixing[:, :3] @ clean_sources
        dirty = record(mixing @ all_sources)

        model = ica.fit_ica(dirty, rng=rng)
        comps = ica.sources(model, dirty)
        report = ica.score_and_reject(model, comps)
        assert report.rejected, "the blink component should be rejected"
        restored = ica.reconstruct_clean(model, comps, report)
        for ch in range(4):
            r = np.corrcoef(restored.samples[ch], clean_signal[ch])[0, 1]
            assert r >= 0.9
