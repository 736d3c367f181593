"""Seeded injection of missing values into fully observed data.

Masks depend only on the seed and the data shape, never on the values, so
the resulting missingness is completely at random.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import DatasetValidationError, IncompleteDataset
from .validation import as_generator

__all__ = [
    "MissingnessSpec",
    "inject_mcar_cap",
    "inject_patch",
    "mcar_cap_mask",
    "patch_mask",
    "write_mask_csv",
    "read_mask_csv",
]

# re-draws of a whole mask before falling back to un-masking single cells
_MAX_REDRAWS = 20


@dataclass(frozen=True)
class MissingnessSpec:
    """``kind='mcar_cap'`` uses ``cap``; ``kind='patch'`` uses the two sides."""

    kind: str
    cap: float = 0.5
    image_side: int = 0
    patch_side: int = 0

    def __post_init__(self):
        if self.kind not in ("mcar_cap", "patch", "none"):
            raise ValueError(f"unknown missingness kind {self.kind!r}")
        if self.kind == "mcar_cap" and not 0.0 < self.cap < 1.0:
            raise ValueError(f"cap must lie in (0, 1), got {self.cap}")
        if self.kind == "patch" and not 0 < self.patch_side <= self.image_side:
            raise ValueError("patch side must be in [1, image_side]")

    def mask(self, shape, seed=None) -> np.ndarray:
        if self.kind == "none":
            return np.ones(shape, dtype=bool)
        if self.kind == "mcar_cap":
            return mcar_cap_mask(shape, self.cap, seed)
        return patch_mask(shape, self.image_side, self.patch_side, seed)

    def apply(self, full: IncompleteDataset, seed=None) -> IncompleteDataset:
        _check_full(full)
        return full.with_mask(self.mask(full.shape, seed))


def _check_full(full: IncompleteDataset):
    if not full.fully_observed:
        raise DatasetValidationError("missingness can only be injected into fully observed data")


def mcar_cap_mask(shape, cap: float, seed=None) -> np.ndarray:
    """Observation mask: each row loses a uniform number in ``0..floor(cap*m)`` of cells.

    If a column ends up entirely missing, the mask is redrawn a bounded number
    of times; after that, one random cell of each empty column is restored.
    """
    n, m = shape
    if not 0.0 < cap < 1.0:
        raise DatasetValidationError(f"cap must lie in (0, 1), got {cap}")
    r_max = int(np.floor(cap * m))
    if r_max < 1:
        raise DatasetValidationError(f"cap*m = {cap * m:g} < 1: nothing could be removed")
    rng = as_generator(seed)
    for _ in range(_MAX_REDRAWS):
        counts = rng.integers(0, r_max + 1, size=n)
        # a random permutation per row; its first r entries are removed
        order = np.argsort(rng.random((n, m)), axis=1)
        ranks = np.argsort(order, axis=1)
        mask = ranks >= counts[:, None]
        if mask.any(axis=0).all():
            return mask
    for l in np.flatnonzero(~mask.any(axis=0)):
        mask[rng.integers(n), l] = True
    return mask


def patch_mask(shape, image_side: int, patch_side: int, seed=None) -> np.ndarray:
    """Mask a random ``patch_side`` square in each row-major ``image_side`` image."""
    n, m = shape
    if image_side * image_side != m:
        raise DatasetValidationError(f"{m} features do not form a {image_side}x{image_side} image")
    if not 1 <= patch_side < image_side:
        raise DatasetValidationError(
            f"patch side {patch_side} must be in [1, {image_side - 1}] to keep a pixel observed"
        )
    rng = as_generator(seed)
    span = image_side - patch_side + 1
    rows = rng.integers(0, span, size=n)
    cols = rng.integers(0, span, size=n)
    mask = np.ones((n, image_side, image_side), dtype=bool)
    for i in range(n):
        mask[i, rows[i] : rows[i] + patch_side, cols[i] : cols[i] + patch_side] = False
    return mask.reshape(n, m)


def inject_mcar_cap(full: IncompleteDataset, cap: float = 0.5, seed=None) -> IncompleteDataset:
    _check_full(full)
    return full.with_mask(mcar_cap_mask(full.shape, cap, seed))


def inject_patch(full: IncompleteDataset, image_side: int, patch_side: int, seed=None) -> IncompleteDataset:
    _check_full(full)
    return full.with_mask(patch_mask(full.shape, image_side, patch_side, seed))


def write_mask_csv(mask, path) -> None:
    """One row per instance, 1 for observed and 0 for missing."""
    with Path(path).open("w", newline="") as fh:
        csv.writer(fh).writerows(np.asarray(mask, dtype=np.int8).tolist())


def read_mask_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        arr = np.array([[int(v) for v in r] for r in rows])
    except ValueError as exc:
        raise DatasetValidationError(f"{path}: mask cells must be 0 or 1") from exc
    if arr.ndim != 2 or not np.isin(arr, (0, 1)).all():
        raise DatasetValidationError(f"{path}: mask must be a rectangular grid of 0/1")
    return arr.astype(bool)
