"""Hierarchical agglomerative clustering over a precomputed dissimilarity matrix.

Single, complete and average linkage. Each step merges one pair of clusters
at the smallest off-diagonal linkage value (zeros included). Equal values are
broken by the pair of smallest original member indices, compared
lexicographically. The diagonal of the input is ignored: the penalized
dissimilarity of a point with itself is generally non-zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .dissimilarity import DissimilarityContext, pairwise_matrix
from .validation import as_dataset, check_n_clusters

__all__ = [
    "LINKAGES",
    "Merge",
    "Dendrogram",
    "linkage_value",
    "build",
    "cut",
    "HACFWPD",
]

LINKAGES = ("single", "average", "complete")
_ALIASES = {"sl": "single", "al": "average", "cl": "complete"}


def _kind(kind: str) -> str:
    kind = _ALIASES.get(kind.lower(), kind.lower())
    if kind not in LINKAGES:
        raise ValueError(f"unknown linkage {kind!r}; expected one of {LINKAGES}")
    return kind


class Merge(NamedTuple):
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge table of an agglomeration over ``n_leaves`` points.

    Leaves are nodes ``0..n-1``; the ``t``-th merge creates node ``n + t``.
    Within a record ``left < right``.
    """

    merges: tuple
    n_leaves: int

    def __post_init__(self):
        object.__setattr__(self, "merges", tuple(Merge(*m) for m in self.merges))
        if len(self.merges) != self.n_leaves - 1:
            raise ValueError(f"expected {self.n_leaves - 1} merges, got {len(self.merges)}")

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_linkage(self) -> np.ndarray:
        """``(n-1, 4)`` float array in the usual linkage-matrix layout."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)

    def inversions(self) -> List[int]:
        """Merge positions whose height is below the previous one."""
        h = self.heights
        return [int(t) for t in np.flatnonzero(np.diff(h) < 0) + 1]

    def leaves(self, node: int) -> List[int]:
        n = self.n_leaves
        stack, out = [node], []
        while stack:
            v = stack.pop()
            if v < n:
                out.append(v)
            else:
                m = self.merges[v - n]
                stack.extend((m.left, m.right))
        return sorted(out)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["left", "right", "height", "size"])
            for m in self.merges:
                writer.writerow([m.left, m.right, repr(float(m.height)), m.size])

    @classmethod
    def read_csv(cls, path) -> "Dendrogram":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        merges = [(int(a), int(b), float(h), int(s)) for a, b, h, s in rows]
        return cls(tuple(merges), len(merges) + 1)


def _check_matrix(matrix) -> np.ndarray:
    D = np.asarray(matrix, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"dissimilarity matrix must be square, got shape {D.shape}")
    if D.shape[0] < 2:
        raise ValueError("need at least two points")
    if not np.all(np.isfinite(D)):
        raise ValueError("dissimilarity matrix must be finite")
    if not np.array_equal(D, D.T):
        scale = max(1.0, float(np.abs(D).max()))
        if not np.allclose(D, D.T, rtol=0, atol=1e-12 * scale):
            raise ValueError("dissimilarity matrix is not symmetric")
        D = (D + D.T) / 2.0
    return D


def linkage_value(matrix, cluster_a, cluster_b, kind: str) -> float:
    """Linkage between two disjoint, non-empty sets of point indices."""
    a, b = sorted(set(cluster_a)), sorted(set(cluster_b))
    if not a or not b:
        raise ValueError("clusters must be non-empty")
    if set(a) & set(b):
        raise ValueError("clusters overlap")
    block = np.asarray(matrix, dtype=float)[np.ix_(a, b)]
    kind = _kind(kind)
    if kind == "single":
        return float(block.min())
    if kind == "complete":
        return float(block.max())
    return float(block.sum() / (len(a) * len(b)))


def build(matrix, kind: str = "average") -> Dendrogram:
    """Agglomerate ``n`` singletons into one cluster; O(n^3) time.

    Cluster ``c`` lives in row ``min(c)`` of the working matrix, so the
    row-major first minimum of the upper triangle is the tie-break winner.
    """
    kind = _kind(kind)
    D = _check_matrix(matrix)
    n = D.shape[0]
    link = D.copy()
    sums = D.copy()  # cross-cluster sums for average linkage
    size = np.ones(n, dtype=np.int64)
    node = np.arange(n)
    active = np.ones(n, dtype=bool)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    merges = []
    for t in range(n - 1):
        live = upper & active[:, None] & active[None, :]
        cand = np.where(live, link, np.inf)
        flat = int(np.argmin(cand))  # first occurrence == lexicographic tie-break
        a, b = divmod(flat, n)
        height = float(cand[a, b])
        left, right = sorted((int(node[a]), int(node[b])))
        merges.append(Merge(left, right, height, int(size[a] + size[b])))

        if kind == "single":
            row = np.minimum(link[a], link[b])
        elif kind == "complete":
            row = np.maximum(link[a], link[b])
        else:
            srow = sums[a] + sums[b]
            sums[a, :] = srow
            sums[:, a] = srow
            row = srow / ((size[a] + size[b]) * size)
        link[a, :] = row
        link[:, a] = row
        size[a] += size[b]
        node[a] = n + t
        active[b] = False
    return Dendrogram(tuple(merges), n)


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Flat labels from undoing the last ``k - 1`` merges.

    Labels are ``0..k-1`` in order of each cluster's smallest member.
    """
    n = dendrogram.n_leaves
    k = check_n_clusters(k, n, upper_inclusive=True)
    parent = list(range(2 * n - 1))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for t, m in enumerate(dendrogram.merges[: n - k]):
        parent[find(m.left)] = n + t
        parent[find(m.right)] = n + t
    roots = [find(i) for i in range(n)]
    dense = {}
    return np.array([dense.setdefault(r, len(dense)) for r in roots], dtype=int)


class HACFWPD(ClusterMixin, BaseEstimator):
    """Agglomerative clustering of data with missing values (NaN).

    Parameters
    ----------
    n_clusters : int, default=2
        Number of clusters in the flat cut stored in ``labels_``.
    linkage : {"single", "average", "complete"}, default="average"
    alpha : float, default=0.25
        Penalty weight of the dissimilarity, in (0, 1).

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    dendrogram_ : Dendrogram
    dissimilarity_ : ndarray of shape (n_samples, n_samples)
    context_ : DissimilarityContext
    """

    def __init__(self, n_clusters=2, linkage="average", alpha=0.25):
        self.n_clusters = n_clusters
        self.linkage = linkage
        self.alpha = alpha

    def fit(self, X, y=None):
        ds = as_dataset(X, min_samples=2)
        k = check_n_clusters(self.n_clusters, ds.n, upper_inclusive=True)
        self.context_ = DissimilarityContext.from_dataset(ds, self.alpha)
        self.dissimilarity_ = pairwise_matrix(self.context_, ds)
        self.dendrogram_ = build(self.dissimilarity_, self.linkage)
        self.labels_ = cut(self.dendrogram_, k)
        self.n_features_in_ = ds.m
        return self
