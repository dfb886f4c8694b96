"""Kernel principal component analysis for EEG feature denoising (155 -> 30).

The fit eigendecomposes the double-centered Gram matrix; centering statistics
are kept so out-of-sample vectors map consistently with the training
projections. Eigenvalues are reported in variance units (Gram eigenvalues
divided by n), so the projected training variance of component j equals
``eigenvalues[j]`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, ReducedRankError

EIGENVALUE_REL_TOL = 1e-9  # positive-eigenvalue cutoff relative to the largest


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and parameters: linear, polynomial, or RBF."""

    kind: str = "poly"
    degree: int = 3
    coef0: float = 1.0
    gamma: float | None = None  # RBF width; defaults to 1/dim at evaluation

    def __post_init__(self):
        if self.kind not in ("linear", "poly", "rbf"):
            raise InputError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "poly" and self.degree < 1:
            raise InputError(f"polynomial degree must be >= 1, got {self.degree}")
        if self.gamma is not None and self.gamma <= 0:
            raise InputError(f"gamma must be positive, got {self.gamma}")


def kernel_matrix(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"kernel inputs disagree: {x.shape[1]} vs {y.shape[1]} dims")
    if spec.kind == "linear":
        return x @ y.T
    if spec.kind == "poly":
        return (x @ y.T + spec.coef0) ** spec.degree
    gamma = spec.gamma if spec.gamma is not None else 1.0 / x.shape[1]
    sq = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ y.T)
        + np.sum(y * y, axis=1)[None, :]
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class KpcaModel:
    support_vectors: np.ndarray  # (n, d) training frames the kernel is evaluated against
    kernel: KernelSpec
    alphas: np.ndarray  # (n, m) eigenvector columns scaled by 1/sqrt(gram eigenvalue)
    eigenvalues: np.ndarray  # (m,) descending, variance units (gram / n)
    row_means: np.ndarray  # (n,) per-column means of the uncentered training Gram
    total_mean: float
    total_positive_mass: float  # sum of ALL positive eigenvalues (variance units)

    @property
    def n_components(self) -> int:
        return self.alphas.shape[1]

    @property
    def input_dim(self) -> int:
        return self.support_vectors.shape[1]


def fit_kpca(x: np.ndarray, kernel: KernelSpec, n_components: int = 30) -> KpcaModel:
    """Fit on training frames; raises a reduced-rank error when the centered
    Gram matrix has fewer positive eigenvalues than requested components."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InputError("fit_kpca expects a 2-D (frames x dims) array")
    n = x.shape[0]
    if n <= n_components:
        raise InputError(f"need more than {n_components} frames, got {n}")
    if not np.all(np.isfinite(x)):
        raise InputError("fit_kpca input contains non-finite values")

    gram = kernel_matrix(kernel, x, x)
    row_means = gram.mean(axis=0)
    total_mean = float(gram.mean())
    centered = gram - row_means[None, :] - row_means[:, None] + total_mean

    eigvals, eigvecs = np.linalg.eigh(centered)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    positive = eigvals > max(eigvals[0], 0.0) * EIGENVALUE_REL_TOL
    usable = int(np.sum(positive))
    if usable < n_components:
        raise ReducedRankError(
            f"centered kernel matrix supports only {usable} components, "
            f"{n_components} requested",
            usable=usable,
        )
    lead_vals = eigvals[:n_components]
    lead_vecs = eigvecs[:, :n_components]
    alphas = lead_vecs / np.sqrt(lead_vals)[None, :]
    return KpcaModel(
        support_vectors=x.copy(),
        kernel=kernel,
        alphas=alphas,
        eigenvalues=lead_vals / n,
        row_means=row_means,
        total_mean=total_mean,
        total_positive_mass=float(np.sum(eigvals[positive]) / n),
    )


def transform_frames(model: KpcaModel, x: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Project rows of ``x`` onto the retained components: (T, d) -> (T, m)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionError(
            f"expected (*, {model.input_dim}) input, got {x.shape}"
        )
    out = np.empty((x.shape[0], model.n_components))
    for start in range(0, x.shape[0], chunk):
        block = x[start : start + chunk]
        k = kernel_matrix(model.kernel, block, model.support_vectors)
        k_centered = (
            k
            - model.row_means[None, :]
            - k.mean(axis=1, keepdims=True)
            + model.total_mean
        )
        out[start : start + chunk] = k_centered @ model.alphas
    return out


def transform(model: KpcaModel, x: np.ndarray) -> np.ndarray:
    """Project a single feature vector; centered kernel row against the support set."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError("transform expects a 1-D vector; use transform_frames for batches")
    return transform_frames(model, x[None, :])[0]


def training_projections(model: KpcaModel) -> np.ndarray:
    """Fitted projections of the support vectors themselves, (n, m)."""
    return transform_frames(model, model.support_vectors)


def cumulative_explained_variance(model: KpcaModel) -> np.ndarray:
    """Running fraction of positive-eigenvalue mass captured per component."""
    return np.cumsum(model.eigenvalues) / model.total_positive_mass
