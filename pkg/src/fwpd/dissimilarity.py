"""Observed distance, feature weighted penalty, and the penalized dissimilarity.

For instances ``x_i`` and ``x_j`` with observed feature sets ``g_i`` and ``g_j``:

* observed distance ``d`` is the Euclidean distance over ``g_i & g_j``;
* penalty ``p`` is the share of total observation weight carried by the
  features outside ``g_i & g_j``;
* the dissimilarity is ``(1 - alpha) * d / d_max + alpha * p``.

Scalar functions take instance indices and exist mostly as readable
references; the ``pairwise_*`` functions are the vectorized workhorses.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .dataset import IncompleteDataset, ObservationWeights, observation_weights

__all__ = [
    "DissimilarityContext",
    "TriangleReport",
    "observed_distance",
    "fwp",
    "max_observed_distance",
    "fwpd",
    "pairwise_observed_distances",
    "pairwise_penalties",
    "pairwise_matrix",
    "point_centroid_dissimilarity",
    "min_positive_rho",
    "check_relaxed_triangle",
    "fwp_absent",
    "fwpd_absent",
    "pairwise_absent_matrix",
    "write_matrix_csv",
    "read_matrix_csv",
]

# upper bound on the number of float cells materialized per broadcast block
_BLOCK_CELLS = 1 << 22


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    return alpha


@dataclass(frozen=True)
class DissimilarityContext:
    """Everything the dissimilarity needs besides the two points.

    ``d_max`` is fixed over the dataset the context was built from; centroids
    and new points never update it.
    """

    weights: ObservationWeights
    d_max: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not self.d_max >= 0:
            raise ValueError(f"d_max must be non-negative, got {self.d_max}")

    @classmethod
    def from_dataset(cls, ds: IncompleteDataset, alpha: float = 0.25) -> "DissimilarityContext":
        return cls(observation_weights(ds), max_observed_distance(ds), alpha)

    def distance_term(self, d):
        """``(1 - alpha) * d / d_max``, taken as 0 when ``d_max`` is 0."""
        if self.d_max == 0:
            return np.zeros_like(np.asarray(d, dtype=float))
        return (1.0 - self.alpha) * np.asarray(d, dtype=float) / self.d_max


def _check_index(ds: IncompleteDataset, *idx):
    for i in idx:
        if not 0 <= i < ds.n:
            raise IndexError(f"instance index {i} out of range for n={ds.n}")


# ------------------------------------------------------------------ scalar forms


def observed_distance(ds: IncompleteDataset, i: int, j: int) -> float:
    _check_index(ds, i, j)
    common = ds.mask[i] & ds.mask[j]
    diff = ds.values[i, common] - ds.values[j, common]
    return float(np.sqrt(np.sum(diff * diff)))


def fwp(ctx: DissimilarityContext, gi: Iterable[int], gj: Iterable[int]) -> float:
    """Penalty for the feature sets ``gi`` and ``gj`` (0-based indices)."""
    common = set(gi) & set(gj)
    kept = sum(int(ctx.weights.w[l]) for l in common)
    return (ctx.weights.total - kept) / ctx.weights.total


def max_observed_distance(ds: IncompleteDataset) -> float:
    if ds.n < 2:
        raise ValueError("need at least two instances for a maximum pairwise distance")
    return float(pairwise_observed_distances(ds).max())


def fwpd(ctx: DissimilarityContext, ds: IncompleteDataset, i: int, j: int) -> float:
    d = observed_distance(ds, i, j)
    p = fwp(ctx, ds.gamma(i), ds.gamma(j))
    return float(ctx.distance_term(d)) + ctx.alpha * p


# ---------------------------------------------------------------- vectorized forms


def _masked_sq_distances(xa, ma, xb, mb) -> np.ndarray:
    """Squared distances over pairwise-common features; ``xa``/``xb`` hold 0 at gaps."""
    na, m = xa.shape
    nb = xb.shape[0]
    out = np.empty((na, nb))
    step = max(1, _BLOCK_CELLS // max(1, nb * m))
    for s in range(0, na, step):
        diff = xa[s : s + step, None, :] - xb[None, :, :]
        both = ma[s : s + step, None, :] & mb[None, :, :]
        out[s : s + step] = np.where(both, diff * diff, 0.0).sum(axis=-1)
    return out


def pairwise_observed_distances(ds: IncompleteDataset) -> np.ndarray:
    x = ds.filled(0.0)
    d = np.sqrt(_masked_sq_distances(x, ds.mask, x, ds.mask))
    np.fill_diagonal(d, 0.0)
    return d


def pairwise_penalties(weights: ObservationWeights, mask_a, mask_b=None) -> np.ndarray:
    """Penalty between every row of ``mask_a`` and every row of ``mask_b``."""
    mask_a = np.asarray(mask_a, dtype=np.int64)
    mask_b = mask_a if mask_b is None else np.asarray(mask_b, dtype=np.int64)
    kept = (mask_a * weights.w) @ mask_b.T  # exact integer arithmetic
    return (weights.total - kept) / weights.total


def pairwise_matrix(ctx: DissimilarityContext, ds: IncompleteDataset) -> np.ndarray:
    """Full ``n x n`` dissimilarity matrix, diagonal included."""
    d = pairwise_observed_distances(ds)
    p = pairwise_penalties(ctx.weights, ds.mask)
    out = ctx.distance_term(d) + ctx.alpha * p
    return (out + out.T) / 2.0  # exact: both halves are computed identically


def point_centroid_dissimilarity(
    ctx: DissimilarityContext,
    values: np.ndarray,
    mask: np.ndarray,
    centroid_values: np.ndarray,
    centroid_mask: np.ndarray,
) -> np.ndarray:
    """Dissimilarity of every point to every centroid, shape ``(n, k)``.

    Centroids carry no observation weight; the point-to-point weights in
    ``ctx`` are used for the penalty.
    """
    x = np.where(mask, values, 0.0)
    z = np.where(centroid_mask, centroid_values, 0.0)
    d = np.sqrt(_masked_sq_distances(x, np.asarray(mask, bool), z, np.asarray(centroid_mask, bool)))
    p = pairwise_penalties(ctx.weights, mask, centroid_mask)
    return ctx.distance_term(d) + ctx.alpha * p


# -------------------------------------------------------- relaxed triangle inequality


def min_positive_rho(ds: IncompleteDataset, weights: Optional[ObservationWeights] = None):
    """Smallest strictly positive triple penalty sum over ordered distinct triples.

    For a triple with ``j`` in the middle the sum covers the features in
    ``(g_i | g_k) - g_j``, ``(g_i & g_k) - g_j``, ``g_j - (g_i | g_k)`` and the
    features observed in none of the three. Returns ``None`` when every sum is
    zero, which happens exactly when the data are fully observed.
    """
    n = ds.n
    if n < 3:
        raise ValueError("need at least three instances")
    weights = observation_weights(ds) if weights is None else weights
    g = ds.mask
    w = weights.w
    gj = g[:, None, :]  # axis 0 -> j
    gk = g[None, :, :]  # axis 1 -> k
    best = None
    idx = np.arange(n)
    for i in range(n):
        gi = g[i][None, None, :]
        union_ik = gi | gk
        inter_ik = gi & gk
        region = (
            (union_ik & ~gj).astype(np.int64)
            + (inter_ik & ~gj)
            + (gj & ~union_ik)
            + ~(union_ik | gj)
        )
        rho = region @ w  # (n_j, n_k) integer sums
        valid = (idx[:, None] != idx[None, :]) & (idx[:, None] != i) & (idx[None, :] != i)
        pos = rho[valid & (rho > 0)]
        if pos.size:
            cand = int(pos.min())
            best = cand if best is None else min(best, cand)
    return None if best is None else best / weights.total


@dataclass(frozen=True)
class TriangleReport:
    """Outcome of :func:`check_relaxed_triangle`.

    ``worst_violation`` is the largest ``D[k, i] - D[i, j] - D[j, k]`` over all
    triples and ``worst_triple`` the ``(i, j, k)`` attaining it.
    """

    ok: bool
    worst_violation: float
    worst_triple: tuple
    epsilon: float

    def __bool__(self):
        return self.ok


def check_relaxed_triangle(matrix, epsilon: float, atol: float = 0.0) -> TriangleReport:
    """Check ``D[i,j] + D[j,k] >= D[k,i] - epsilon**2`` for every triple."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    D = np.asarray(matrix, dtype=float)
    worst, triple = -np.inf, (0, 0, 0)
    for j in range(D.shape[0]):
        viol = D.T - D[:, j][:, None] - D[j, :][None, :]  # [i, k]
        flat = int(np.argmax(viol))
        if viol.flat[flat] > worst:
            i, k = divmod(flat, D.shape[0])
            worst, triple = float(viol.flat[flat]), (i, j, k)
    return TriangleReport(worst <= epsilon**2 + atol, worst, triple, float(epsilon))


# ------------------------------------------------------------- absent features


def fwp_absent(weights, gi: Iterable[int], gj: Iterable[int]) -> float:
    """Penalty for features defined on exactly one of the two points.

    Normalized by the weight of features defined on either point, so features
    absent from both are ignored.
    """
    w = weights.w if isinstance(weights, ObservationWeights) else np.asarray(weights)
    gi, gj = set(gi), set(gj)
    union = gi | gj
    if not union:
        raise ValueError("feature sets must not both be empty")
    num = sum(int(w[l]) for l in union - (gi & gj))
    den = sum(int(w[l]) for l in union)
    return num / den


def fwpd_absent(ctx: DissimilarityContext, ds: IncompleteDataset, i: int, j: int) -> float:
    d = observed_distance(ds, i, j)
    return float(ctx.distance_term(d)) + ctx.alpha * fwp_absent(ctx.weights, ds.gamma(i), ds.gamma(j))


def pairwise_absent_matrix(ctx: DissimilarityContext, ds: IncompleteDataset) -> np.ndarray:
    m = ds.mask.astype(np.int64)
    w = ctx.weights.w
    both = (m * w) @ m.T
    per_row = m @ w
    either = per_row[:, None] + per_row[None, :] - both
    p = (either - both) / either
    out = ctx.distance_term(pairwise_observed_distances(ds)) + ctx.alpha * p
    return (out + out.T) / 2.0


# ------------------------------------------------------------------------ export


def write_matrix_csv(matrix, path) -> None:
    """Square CSV with a header row of instance indices, 12 significant digits."""
    D = np.asarray(matrix, dtype=float)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(range(D.shape[0]))
        for row in D:
            writer.writerow(f"{v:.12g}" for v in row)


def read_matrix_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]])
