"""k-means for incomplete data under the penalized dissimilarity.

Lloyd-style alternation: centroids are member means over the features their
members observe (previously observed centroid features are carried over), and
points move to the centroid of least dissimilarity. After convergence the
final centroids drop carried-over features so that each centroid observes
exactly the union of its members' features.

Passing ``ctx=None`` to :func:`run` switches the same loop to standard k-means
(squared Euclidean, fully observed data); the imputation baselines use that.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import IncompleteDataset, feature_set
from .dissimilarity import DissimilarityContext, point_centroid_dissimilarity
from .validation import as_dataset, as_generator, check_n_clusters

__all__ = [
    "EmptyClusterError",
    "CentroidSet",
    "KMeansTrace",
    "ClusteringResult",
    "init_random",
    "update_centroids",
    "final_centroids",
    "dissimilarities",
    "assign",
    "objective",
    "detect_feasibility_adjustment",
    "run",
    "standard_kmeans",
    "KMeansFWPD",
]

TIE_TOL = 1e-12


class EmptyClusterError(ValueError):
    """A centroid was requested for a cluster with no members."""

    def __init__(self, clusters):
        self.clusters = list(clusters)
        super().__init__(f"empty clusters: {self.clusters}")


@dataclass(frozen=True, eq=False)
class CentroidSet:
    """``k`` centroids; ``values`` is NaN wherever ``mask`` is False."""

    values: np.ndarray
    mask: np.ndarray

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def gamma(self, j: int) -> frozenset:
        return feature_set(self.mask[j])


@dataclass
class KMeansTrace:
    """Per-iteration record of one run.

    Iteration ``t`` (1-based) computes centroids ``Z^t`` from ``U^t`` and then
    reassigns points to get ``U^(t+1)``. ``update_objective[t-1]`` is
    ``f(U^t, Z^t)`` and ``assign_objective[t-1]`` is ``f(U^(t+1), Z^t)``,
    measured before any empty-cluster repair.
    """

    update_objective: List[float] = field(default_factory=list)
    assign_objective: List[float] = field(default_factory=list)
    adjustments: List[tuple] = field(default_factory=list)  # (t, cluster, added features)
    empty_repairs: List[tuple] = field(default_factory=list)  # (t, cluster, moved instance)
    assignments: List[np.ndarray] = field(default_factory=list)  # U^1, U^2, ...
    n_iter: int = 0
    converged: bool = False

    @property
    def n_adjustments(self) -> int:
        return len(self.adjustments)

    def adjustment_iterations(self) -> set:
        return {t for t, _, _ in self.adjustments}

    def update_increases(self) -> list:
        """Iterations whose centroid update raised ``f`` with no feasibility adjustment.

        Mean centroids are not exact minimizers of a sum of unsquared
        distances, so this can happen; it is reported, not treated as an error.
        """
        adj = self.adjustment_iterations()
        out = []
        for t in range(2, self.n_iter + 1):
            before = self.assign_objective[t - 2]
            after = self.update_objective[t - 1]
            if t not in adj and after > before + 1e-12:
                out.append((t, after - before))
        return out

    def rows(self):
        """(iteration, objective, adjustment-event count) for CSV export."""
        counts = {}
        for t, _, _ in self.adjustments:
            counts[t] = counts.get(t, 0) + 1
        return [(t, self.update_objective[t - 1], counts.get(t, 0)) for t in range(1, self.n_iter + 1)]


@dataclass
class ClusteringResult:
    labels: np.ndarray
    centroids: CentroidSet
    objective: float
    trace: KMeansTrace
    last_centroids: Optional[CentroidSet] = None  # Z^T, before carried features were dropped

    @property
    def converged(self) -> bool:
        return self.trace.converged


# ----------------------------------------------------------------------- steps


def init_random(n: int, k: int, seed=None, max_retries: int = 100) -> np.ndarray:
    """Uniform random labels in ``0..k-1`` with every cluster non-empty.

    Re-draws up to ``max_retries`` times, then seeds one random instance into
    each cluster and keeps the last draw for the rest.
    """
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = as_generator(seed)
    for _ in range(max_retries):
        labels = rng.integers(0, k, size=n)
        if np.unique(labels).size == k:
            return labels
    labels[rng.permutation(n)[:k]] = np.arange(k)
    return labels


def update_centroids(
    ds: IncompleteDataset, labels, prev: Optional[CentroidSet] = None, k: Optional[int] = None
) -> CentroidSet:
    """Member means over observed cells, carrying over features only ``prev`` had."""
    labels = np.asarray(labels)
    k = (prev.k if prev is not None else int(labels.max()) + 1) if k is None else k
    onehot = labels[:, None] == np.arange(k)[None, :]  # (n, k)
    sizes = onehot.sum(axis=0)
    if np.any(sizes == 0):
        raise EmptyClusterError(np.flatnonzero(sizes == 0))
    obs = ds.mask.astype(float)
    counts = onehot.T.astype(float) @ obs  # (k, m) members observing each feature
    sums = onehot.T.astype(float) @ ds.filled(0.0)
    member_union = counts > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    values = np.where(member_union, means, np.nan)
    mask = member_union.copy()
    if prev is not None:
        carried = prev.mask & ~member_union
        values[carried] = prev.values[carried]
        mask |= carried
    return CentroidSet(values, mask)


def final_centroids(ds: IncompleteDataset, labels, k: Optional[int] = None) -> CentroidSet:
    """Centroids observing exactly the union of their members' features."""
    return update_centroids(ds, labels, None, k)


def dissimilarities(ds: IncompleteDataset, ctx: Optional[DissimilarityContext], Z: CentroidSet):
    """Point-to-centroid dissimilarities, shape ``(n, k)``.

    With ``ctx=None`` this is the squared Euclidean distance of standard k-means.
    """
    if ctx is None:
        if not ds.fully_observed or not Z.mask.all():
            raise ValueError("standard k-means needs fully observed data")
        diff = ds.values[:, None, :] - Z.values[None, :, :]
        return (diff * diff).sum(axis=-1)
    return point_centroid_dissimilarity(ctx, ds.values, ds.mask, Z.values, Z.mask)


def _argmin_lowest(D: np.ndarray) -> np.ndarray:
    best = D.min(axis=1, keepdims=True)
    return np.argmax(D <= best + TIE_TOL, axis=1)


def assign(ds: IncompleteDataset, ctx: Optional[DissimilarityContext], Z: CentroidSet) -> np.ndarray:
    """Nearest centroid per point; near-ties (within 1e-12) go to the lowest index."""
    return _argmin_lowest(dissimilarities(ds, ctx, Z))


def objective(ds: IncompleteDataset, ctx: Optional[DissimilarityContext], labels, Z: CentroidSet) -> float:
    D = dissimilarities(ds, ctx, Z)
    return float(D[np.arange(ds.n), np.asarray(labels)].sum())


def detect_feasibility_adjustment(prev: CentroidSet, nxt: CentroidSet) -> list:
    """``(cluster, added features)`` for every centroid whose feature set grew."""
    if prev.k != nxt.k:
        raise ValueError("centroid sets differ in k")
    grown = nxt.mask & ~prev.mask
    return [(j, feature_set(grown[j])) for j in range(nxt.k) if grown[j].any()]


def _repair_empty(labels, D, k):
    """Move the worst-fitting point of a multi-member cluster into each empty cluster."""
    labels = labels.copy()
    moves = []
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        cost = D[np.arange(labels.size), labels].copy()
        cost[sizes[labels] < 2] = -np.inf
        i = int(np.argmax(cost))
        labels[i] = j
        moves.append((j, i))
    return labels, moves


# ------------------------------------------------------------------------- run


def run(
    ds: IncompleteDataset,
    ctx: Optional[DissimilarityContext],
    k: int,
    seed=None,
    max_iter: Optional[int] = None,
    init=None,
) -> ClusteringResult:
    """Alternate centroid updates and reassignment until the labels repeat.

    Parameters
    ----------
    ds : IncompleteDataset
    ctx : DissimilarityContext or None
        ``None`` runs standard squared-Euclidean k-means on complete data.
    k : int
        Number of clusters, ``2 <= k < n``.
    seed : int, Generator or None
        Used for the random initial assignment when ``init`` is not given.
    max_iter : int, optional
        Safety valve, default ``10 * n * k``. Hitting it returns the last
        iterate with ``converged=False``.
    init : array-like of int, optional
        Initial labels in ``0..k-1``; every cluster must be non-empty.
    """
    n = ds.n
    if not 2 <= k < n:
        raise ValueError(f"need 2 <= k < n, got k={k}, n={n}")
    max_iter = 10 * n * k if max_iter is None else int(max_iter)
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if init is None:
        labels = init_random(n, k, seed)
    else:
        labels = np.asarray(init, dtype=int).copy()
        if labels.shape != (n,) or labels.min() < 0 or labels.max() >= k:
            raise ValueError("init must hold n labels in 0..k-1")

    trace = KMeansTrace()
    trace.assignments.append(labels.copy())
    Z_prev = None
    Z = None
    for t in range(1, max_iter + 1):
        Z = update_centroids(ds, labels, Z_prev, k)
        if Z_prev is not None:
            for j, added in detect_feasibility_adjustment(Z_prev, Z):
                trace.adjustments.append((t, j, added))
        D = dissimilarities(ds, ctx, Z)
        rows = np.arange(n)
        trace.update_objective.append(float(D[rows, labels].sum()))
        new = _argmin_lowest(D)
        trace.assign_objective.append(float(D[rows, new].sum()))
        new, moves = _repair_empty(new, D, k)
        trace.empty_repairs.extend((t, j, i) for j, i in moves)
        trace.n_iter = t
        trace.assignments.append(new.copy())
        if np.array_equal(new, labels):
            trace.converged = True
            break
        labels = new
        Z_prev = Z

    Z_final = final_centroids(ds, labels, k)
    f = objective(ds, ctx, labels, Z_final)
    return ClusteringResult(labels=labels, centroids=Z_final, objective=f, trace=trace, last_centroids=Z)


def standard_kmeans(X, k: int, seed=None, init=None, max_iter: Optional[int] = None) -> ClusteringResult:
    """Standard k-means on complete data, sharing the loop of :func:`run`."""
    ds = as_dataset(X)
    return run(ds, None, k, seed=seed, max_iter=max_iter, init=init)


# ------------------------------------------------------------------- estimator


class KMeansFWPD(ClusterMixin, BaseEstimator):
    """k-means clustering of data with missing values (NaN) under the penalized dissimilarity.

    Parameters
    ----------
    n_clusters : int, default=2
    alpha : float, default=0.25
        Weight of the missingness penalty against the normalized observed
        distance; must lie in (0, 1).
    max_iter : int, optional
        Safety cap on iterations, default ``10 * n * k``.
    random_state : int, Generator or None
        Seed for the random initial assignment.
    init : array-like of int, optional
        Explicit initial labels; overrides ``random_state``.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
        Final centroids, NaN at features none of the members observe.
    centroid_mask_ : ndarray of bool
    objective_ : float
    n_iter_ : int
    converged_ : bool
    context_ : DissimilarityContext
        Observation weights and ``d_max`` of the training data.
    result_ : ClusteringResult
    """

    def __init__(self, n_clusters=2, alpha=0.25, max_iter=None, random_state=None, init=None):
        self.n_clusters = n_clusters
        self.alpha = alpha
        self.max_iter = max_iter
        self.random_state = random_state
        self.init = init

    def fit(self, X, y=None):
        ds = as_dataset(X, min_samples=2)
        k = check_n_clusters(self.n_clusters, ds.n)
        ctx = DissimilarityContext.from_dataset(ds, self.alpha)
        result = run(ds, ctx, k, seed=self.random_state, max_iter=self.max_iter, init=self.init)
        self.context_ = ctx
        self.result_ = result
        self.labels_ = result.labels
        self.cluster_centers_ = result.centroids.values
        self.centroid_mask_ = result.centroids.mask
        self.objective_ = result.objective
        self.n_iter_ = result.trace.n_iter
        self.converged_ = result.converged
        self.n_features_in_ = ds.m
        return self

    def transform(self, X):
        """Dissimilarity of each sample to each final centroid."""
        check_is_fitted(self, "result_")
        if isinstance(X, IncompleteDataset):
            values, mask = X.values, X.mask
        else:
            values = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
            mask = ~np.isnan(values)
        if values.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {values.shape[1]}")
        Z = self.result_.centroids
        return point_centroid_dissimilarity(self.context_, values, mask, Z.values, Z.mask)

    def predict(self, X):
        return _argmin_lowest(self.transform(X))
