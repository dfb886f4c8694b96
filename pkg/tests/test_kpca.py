import numpy as np
import pytest

from neurospeaker import kpca
from neurospeaker.core import make_rng
from neurospeaker.errors import DimensionError, InputError, ReducedRankError


def pca_oracle_projections(x, n_components):
    """Classical PCA via covariance eigendecomposition, independent of kpca."""
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    return centered @ eigvecs[:, order]


def sign_align(reference, candidate):
    signs = np.sign(np.sum(reference * candidate, axis=0))
    signs[signs == 0] = 1.0
    return candidate * signs


class TestLinearKernelEqualsPca:
    def test_matches_classical_pca(self):
        rng = make_rng(0)
        x = rng.standard_normal((50, 10))
        model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=10)
        projections = kpca.training_projections(model)
        oracle = pca_oracle_projections(x, 10)
        np.testing.assert_allclose(sign_align(oracle, projections), oracle, atol=1e-6)

    def test_eigenvalues_match_covariance_spectrum(self):
        rng = make_rng(1)
        x = rng.standard_normal((60, 8)) * np.array([3.0, 2.0, 1.5, 1.0, 0.8, 0.5, 0.3, 0.1])
        model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=8)
        centered = x - x.mean(axis=0)
        cov_eigs = np.sort(np.linalg.eigvalsh(centered.T @ centered / x.shape[0]))[::-1]
        np.testing.assert_allclose(model.eigenvalues, cov_eigs, rtol=1e-8, atol=1e-12)


class TestFit:
    def test_reduced_rank_error_reports_usable_count(self):
        rng = make_rng(2)
        distinct = rng.standard_normal((5, 155))
        x = distinct[rng.integers(0, 5, size=60)]
        with pytest.raises(ReducedRankError) as err:
            kpca.fit_kpca(x, kpca.KernelSpec(), n_components=30)
        assert err.value.usable <= 4

    def test_needs_more_frames_than_components(self):
        rng = make_rng(3)
        with pytest.raises(InputError):
            kpca.fit_kpca(rng.standard_normal((30, 155)), kpca.KernelSpec(), 30)

    def test_duplicated_rows_leave_projections_unchanged(self):
        rng = make_rng(4)
        x = rng.standard_normal((40, 6))
        spec = kpca.KernelSpec(kind="poly", degree=3, coef0=1.0)
        base = kpca.fit_kpca(x, spec, n_components=5)
        doubled = kpca.fit_kpca(np.vstack([x, x]), spec, n_components=5)
        p_base = kpca.training_projections(base)
        p_doubled = kpca.training_projections(doubled)[: x.shape[0]]
        np.testing.assert_allclose(sign_align(p_base, p_doubled), p_base, atol=1e-6)

    def test_rejects_non_finite_input(self):
        x = np.zeros((40, 5))
        x[3, 2] = np.inf
        with pytest.raises(InputError):
            kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), 3)


class TestTransform:
    def _model(self, seed=5, n=60, d=8, m=6, kind="poly"):
        rng = make_rng(seed)
        x = rng.standard_normal((n, d))
        return x, kpca.fit_kpca(x, kpca.KernelSpec(kind=kind), n_components=m)

    def test_training_rows_match_fitted_projections(self):
        x, model = self._model()
        fitted = kpca.training_projections(model)
        for i in (0, 7, 41):
            out = kpca.transform(model, x[i])
            np.testing.assert_allclose(out, fitted[i], rtol=1e-8, atol=1e-8)

    def test_output_width_is_component_count(self):
        x, model = self._model(m=6)
        assert kpca.transform(model, x[0]).shape == (6,)
        model30 = kpca.fit_kpca(
            make_rng(6).standard_normal((80, 155)), kpca.KernelSpec(), n_components=30
        )
        assert model30.n_components == 30
        assert kpca.transform(model30, np.zeros(155)).shape == (30,)

    def test_training_mean_projects_to_zero_linear_kernel(self):
        rng = make_rng(7)
        x = rng.standard_normal((50, 10))
        model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=5)
        out = kpca.transform(model, x.mean(axis=0))
        np.testing.assert_allclose(out, 0.0, atol=1e-6)

    def test_dimension_mismatch_rejected(self):
        _, model = self._model(d=8)
        with pytest.raises(DimensionError):
            kpca.transform(model, np.zeros(9))

    def test_in_sample_projection_mean_is_zero(self):
        _, model = self._model(kind="rbf")
        projections = kpca.training_projections(model)
        np.testing.assert_allclose(projections.mean(axis=0), 0.0, atol=1e-8)

    def test_batch_transform_matches_vector_transform(self):
        x, model = self._model()
        rng = make_rng(8)
        queries = rng.standard_normal((7, 8))
        batch = kpca.transform_frames(model, queries, chunk=3)
        for i in range(7):
            np.testing.assert_allclose(batch[i], kpca.transform(model, queries[i]), atol=1e-10)


class TestExplainedVariance:
    def test_monotone_and_bounded(self):
        rng = make_rng(9)
        x = rng.standard_normal((60, 12))
        model = kpca.fit_kpca(x, kpca.KernelSpec(), n_components=6)
        curve = kpca.cumulative_explained_variance(model)
        assert np.all(np.diff(curve) >= -1e-12)
        assert curve[-1] <= 1.0 + 1e-12

    def test_rank_one_data_explained_by_first_component(self):
        rng = make_rng(10)
        direction = rng.standard_normal(10)
        x = np.outer(rng.standard_normal(40), direction)
        model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=1)
        curve = kpca.cumulative_explained_variance(model)
        assert abs(curve[0] - 1.0) < 1e-9

    def test_isotropic_gaussian_curve_is_uniform(self):
        # linear-kernel spectrum of isotropic data should track k/d; the
        # finite-sample (Marchenko-Pastur) spread stays within 0.05 for this
        # n/d ratio
        rng = make_rng(11)
        d, n = 10, 1500
        x = rng.standard_normal((n, d))
        model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=d)
        curve = kpca.cumulative_explained_variance(model)
        uniform = np.arange(1, d + 1) / d
        assert np.max(np.abs(curve - uniform)) < 0.05

    def test_full_rank_retention_sums_to_one(self):
        rng = make_rng(12)
        x = rng.standard_normal((30, 5))
        model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=5)
        curve = kpca.cumulative_explained_variance(model)
        assert abs(curve[-1] - 1.0) < 1e-9


def test_out_of_sample_transform_is_stable_under_refit():
    # qualitative: adding one point to a large training set barely moves its
    # out-of-sample projection (no fixed bound in the contract; a loose one
    # guards regressions)
    rng = make_rng(13)
    x = rng.standard_normal((400, 8))
    query = rng.standard_normal(8)
    spec = kpca.KernelSpec(kind="poly", degree=3, coef0=1.0)
    before = kpca.fit_kpca(x, spec, n_components=4)
    after = kpca.fit_kpca(np.vstack([x, query[None, :]]), spec, n_components=4)
    p_before = kpca.transform(before, query)
    p_after = kpca.transform(after, query)
    signs = np.sign(p_before * p_after)
    signs[signs == 0] = 1.0
    drift = np.linalg.norm(p_before - signs * p_after) / np.linalg.norm(p_before)
    assert drift < 0.05


def test_pca_equivalence_sweep():
    # acceptance-grade sweep at unit-test scale: see test_acceptance for the
    # full 100-instance version
    for seed in range(10):
        rng = make_rng(seed)
        x = rng.standard_normal((50, 10))
        model = kpca.fit_kpca(x, kpca.KernelSpec(kind="linear"), n_components=10)
        projections = kpca.training_projections(model)
        oracle = pca_oracle_projections(x, 10)
        np.testing.assert_allclose(sign_align(oracle, projections), oracle, atol=1e-6)
