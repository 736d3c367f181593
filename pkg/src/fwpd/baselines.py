"""Imputation baselines and the partial distance strategy.

Each imputer returns a :class:`CompletedDataset` whose observed cells are the
source cells, bit for bit. Completed data are then clustered with the
standard algorithms (:func:`standard_kmeans`, :func:`standard_hac`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dataset import IncompleteDataset
from .dissimilarity import _masked_sq_distances
from .hac import Dendrogram, build
from .kmeans import standard_kmeans  # noqa: F401  re-exported for the baselines API
from .validation import as_dataset

__all__ = [
    "CompletedDataset",
    "impute_zero",
    "impute_mean",
    "impute_knn",
    "impute_svd",
    "pds_matrix",
    "euclidean_matrix",
    "standard_kmeans",
    "standard_hac",
    "ZeroImputer",
    "MeanImputer",
    "KNNImputer",
    "SVDImputer",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CompletedDataset:
    """Fully observed values plus a record of how the gaps were filled.

    ``converged`` is only meaningful for iterative imputers.
    """

    values: np.ndarray
    provenance: dict = field(default_factory=dict)
    converged: bool = True

    def as_dataset(self, labels=None) -> IncompleteDataset:
        return IncompleteDataset(self.values, labels=labels)


def _complete(ds: IncompleteDataset, fill: np.ndarray, provenance: dict, converged=True):
    values = np.where(ds.mask, ds.values, fill)
    return CompletedDataset(values, provenance, converged)


def impute_zero(ds: IncompleteDataset) -> CompletedDataset:
    return _complete(ds, 0.0, {"imputer": "zero"})


def _column_means(ds: IncompleteDataset) -> np.ndarray:
    return ds.filled(0.0).sum(axis=0) / ds.mask.sum(axis=0)


def _class_balanced_means(ds: IncompleteDataset, labels) -> np.ndarray:
    labels = np.asarray(labels)
    x = ds.filled(0.0)
    per_class = []
    for c in np.unique(labels):
        rows = labels == c
        cnt = ds.mask[rows].sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            per_class.append(np.where(cnt > 0, x[rows].sum(axis=0) / cnt, np.nan))
    # classes that never observe a feature are skipped for that feature
    return np.nanmean(np.vstack(per_class), axis=0)


def impute_mean(ds: IncompleteDataset, class_balanced: bool = False, labels=None) -> CompletedDataset:
    """Fill with the column mean, or with the unweighted mean of per-class means."""
    if class_balanced:
        labels = ds.labels if labels is None else labels
        if labels is None:
            raise ValueError("class-balanced mean imputation needs labels")
        means = _class_balanced_means(ds, labels)
    else:
        means = _column_means(ds)
    return _complete(ds, means[None, :], {"imputer": "mean", "class_balanced": class_balanced})


def impute_knn(ds: IncompleteDataset, k: int = 5) -> CompletedDataset:
    """Fill each gap with the mean over the ``k`` nearest donors that observe it.

    Donors are ranked by the unscaled observed distance; instances sharing no
    observed feature with the recipient are never donors. Distance ties go to
    the lower index. With no donor for a cell the column mean is used.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = ds.n
    if k >= n:
        log.warning("kNN imputation: k=%d >= n=%d, clamping to %d", k, n, n - 1)
        k = n - 1
    x = ds.filled(0.0)
    sq = _masked_sq_distances(x, ds.mask, x, ds.mask)
    shares = ds.mask.astype(np.int64) @ ds.mask.T.astype(np.int64) > 0
    col_means = _column_means(ds)
    out = x.copy()
    for i in np.flatnonzero(~ds.mask.all(axis=1)):
        donors = shares[i].copy()
        donors[i] = False
        cand = np.flatnonzero(donors)
        order = cand[np.lexsort((cand, sq[i, cand]))]
        for l in np.flatnonzero(~ds.mask[i]):
            have = order[ds.mask[order, l]][:k]
            out[i, l] = ds.values[have, l].mean() if have.size else col_means[l]
    return CompletedDataset(out, {"imputer": "knn", "k": k})


def impute_svd(
    ds: IncompleteDataset,
    eigen_fraction: float = 0.10,
    max_rounds: int = 100,
    tol: float = 1e-6,
) -> CompletedDataset:
    """Iterative low-rank regression imputation.

    Starting from column means, each round takes the top ``r`` right singular
    vectors of the filled matrix, ``r = max(1, round(eigen_fraction *
    min(n, m)))``, and re-estimates each row's gaps by least-squares
    regression of its observed cells on those vectors. Stops once no gap
    moves by more than ``tol``; ``converged`` is False if ``max_rounds`` ran out.
    """
    if not 0 < eigen_fraction <= 1:
        raise ValueError("eigen_fraction must lie in (0, 1]")
    prov = {"imputer": "svd", "eigen_fraction": eigen_fraction, "rounds": 0}
    if ds.fully_observed:
        return CompletedDataset(ds.values.copy(), prov)
    n, m = ds.shape
    r = max(1, int(round(eigen_fraction * min(n, m))))
    prov["rank"] = r
    filled = np.where(ds.mask, ds.values, _column_means(ds)[None, :])
    incomplete = np.flatnonzero(~ds.mask.all(axis=1))
    converged = False
    for rounds in range(1, max_rounds + 1):
        _, _, vt = np.linalg.svd(filled, full_matrices=False)
        V = vt[:r].T  # (m, r)
        new = filled.copy()
        for i in incomplete:
            obs = ds.mask[i]
            coef, *_ = np.linalg.lstsq(V[obs], filled[i, obs], rcond=None)
            new[i, ~obs] = V[~obs] @ coef
        change = float(np.max(np.abs(new - filled)))
        filled = new
        prov["rounds"] = rounds
        if change < tol:
            converged = True
            break
    if not converged:
        log.warning("SVD imputation stopped after %d rounds without converging", max_rounds)
    return CompletedDataset(filled, prov, converged)


# ----------------------------------------------------------------- distances


def euclidean_matrix(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    full = np.ones(x.shape, dtype=bool)
    d = np.sqrt(_masked_sq_distances(x, full, x, full))
    np.fill_diagonal(d, 0.0)
    return d


def pds_matrix(ds: IncompleteDataset, sentinel: float = None) -> np.ndarray:
    """Observed distance rescaled by ``m / |common features|``.

    Pairs with no common feature get ``sentinel``, by default twice the
    largest finite entry (1.0 if there is none).
    """
    x = ds.filled(0.0)
    sq = _masked_sq_distances(x, ds.mask, x, ds.mask)
    common = ds.mask.astype(np.int64) @ ds.mask.T.astype(np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        D = np.sqrt(ds.m / common * sq)
    finite = common > 0
    if sentinel is None:
        off = finite & ~np.eye(ds.n, dtype=bool)
        sentinel = 2.0 * float(D[off].max()) if off.any() and D[off].max() > 0 else 1.0
    D[~finite] = sentinel
    np.fill_diagonal(D, 0.0)
    return D


def standard_hac(values, kind: str = "average") -> Dendrogram:
    """Standard agglomerative clustering on Euclidean distances of complete data."""
    return build(euclidean_matrix(values), kind)


# ----------------------------------------------------------- transformers


class _Imputer(TransformerMixin, BaseEstimator):
    def fit(self, X, y=None):
        ds = as_dataset(X)
        self.n_features_in_ = ds.m
        self._fit(ds, y)
        return self

    def _fit(self, ds, y):
        pass

    def transform(self, X):
        ds = as_dataset(X)
        if ds.m != getattr(self, "n_features_in_", ds.m):
            raise ValueError(f"expected {self.n_features_in_} features, got {ds.m}")
        return self._impute(ds).values


class ZeroImputer(_Imputer):
    """Replace missing cells (NaN) with 0."""

    def _impute(self, ds):
        return impute_zero(ds)


class MeanImputer(_Imputer):
    """Replace missing cells with training means.

    With ``class_balanced=True`` and labels passed to ``fit``, the fill value
    is the average of the per-class means rather than the overall mean.
    """

    def __init__(self, class_balanced=False):
        self.class_balanced = class_balanced

    def _fit(self, ds, y):
        if self.class_balanced:
            if y is None:
                raise ValueError("class_balanced=True needs y")
            self.means_ = _class_balanced_means(ds, y)
        else:
            self.means_ = _column_means(ds)

    def _impute(self, ds):
        return _complete(ds, self.means_[None, :], {"imputer": "mean"})


class KNNImputer(_Imputer):
    """Nearest-neighbour imputation; donors come from the data being transformed."""

    def __init__(self, n_neighbors=5):
        self.n_neighbors = n_neighbors

    def _impute(self, ds):
        return impute_knn(ds, self.n_neighbors)


class SVDImputer(_Imputer):
    """Low-rank regression imputation fitted on the data being transformed."""

    def __init__(self, eigen_fraction=0.10, max_rounds=100, tol=1e-6):
        self.eigen_fraction = eigen_fraction
        self.max_rounds = max_rounds
        self.tol = tol

    def _impute(self, ds):
        return impute_svd(ds, self.eigen_fraction, self.max_rounds, self.tol)
