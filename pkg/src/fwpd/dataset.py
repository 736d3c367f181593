"""Incomplete datasets: storage, CSV ingestion, z-scoring and observation counts.

Missing cells are stored as ``NaN`` in ``values`` and as ``False`` in ``mask``;
the two always agree. Arrays are made read-only on construction.
"""
from __future__ import annotations

import csv
import math
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "DatasetFormatError",
    "DatasetValidationError",
    "IncompleteDataset",
    "ObservationWeights",
    "ZScoreStats",
    "feature_set",
    "load_csv",
    "write_csv",
    "normalize_zscore",
    "zscore_stats",
    "denormalize_zscore",
    "observation_weights",
    "bundled_path",
    "load_iris",
]


class DatasetFormatError(ValueError):
    """Raised when a file cannot be parsed into a rectangular numeric table."""


class DatasetValidationError(ValueError):
    """Raised when a table violates the incomplete-dataset invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class IncompleteDataset:
    """n instances over m real features with a per-cell observation mask.

    Parameters
    ----------
    values : ndarray of shape (n, m)
        Feature values; unobserved cells must be NaN.
    mask : ndarray of bool, shape (n, m), optional
        ``True`` where a cell is observed. Derived from ``values`` if omitted.
    labels : sequence of length n, optional
        Class identifiers. Stored as dense integer ids in ``labels`` with the
        original identifiers kept (in id order) in ``label_names``.
    feature_names : sequence of str of length m, optional
    """

    values: np.ndarray
    mask: Optional[np.ndarray] = None
    labels: Optional[Sequence] = None
    feature_names: Optional[Sequence[str]] = None
    label_names: tuple = field(default=(), repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DatasetValidationError(f"values must be 2-D, got shape {values.shape}")
        if self.mask is None:
            mask = ~np.isnan(values)
        else:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise DatasetValidationError(
                    f"mask shape {mask.shape} does not match values shape {values.shape}"
                )
            if np.any(np.isnan(values[mask])):
                raise DatasetValidationError("observed cells must hold a value")
            values = np.where(mask, values, np.nan)
        if np.any(np.isinf(values)):
            raise DatasetValidationError("values must be finite or NaN")
        n, m = values.shape
        empty_rows = np.flatnonzero(~mask.any(axis=1))
        if empty_rows.size:
            raise DatasetValidationError(
                f"instance {int(empty_rows[0])} has no observed feature"
            )
        empty_cols = np.flatnonzero(~mask.any(axis=0))
        if empty_cols.size:
            raise DatasetValidationError(
                f"feature {int(empty_cols[0])} is not observed in any instance"
            )
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

        if self.labels is not None:
            raw = list(self.labels)
            if len(raw) != n:
                raise DatasetValidationError(f"expected {n} labels, got {len(raw)}")
            if self.label_names:
                ids = np.asarray(raw, dtype=int)
                names = tuple(self.label_names)
            else:
                names = tuple(dict.fromkeys(raw))
                lookup = {name: i for i, name in enumerate(names)}
                ids = np.array([lookup[r] for r in raw], dtype=int)
            object.__setattr__(self, "labels", _frozen(ids))
            object.__setattr__(self, "label_names", names)
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != m:
                raise DatasetValidationError(f"expected {m} feature names, got {len(names)}")
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def gamma(self, i: int) -> frozenset:
        """Observed feature indices of instance ``i``."""
        return feature_set(self.mask[i])

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def filled(self, fill_value: float = 0.0) -> np.ndarray:
        """Writable copy of ``values`` with missing cells set to ``fill_value``."""
        return np.where(self.mask, self.values, fill_value)

    def with_mask(self, mask: np.ndarray) -> "IncompleteDataset":
        """Same data with extra cells hidden; ``mask`` must be a subset of the current mask."""
        mask = np.asarray(mask, dtype=bool)
        if np.any(mask & ~self.mask):
            raise DatasetValidationError("cannot reveal cells that were never observed")
        return self._replace(values=np.where(mask, self.values, np.nan), mask=mask)

    def _replace(self, **changes) -> "IncompleteDataset":
        kwargs = dict(
            values=self.values,
            mask=self.mask,
            labels=self.labels,
            feature_names=self.feature_names,
            label_names=self.label_names,
        )
        kwargs.update(changes)
        return IncompleteDataset(**kwargs)


def feature_set(row_mask) -> frozenset:
    return frozenset(int(l) for l in np.flatnonzero(row_mask))


@dataclass(frozen=True)
class ObservationWeights:
    """Per-feature observation counts ``w`` and their sum."""

    w: np.ndarray
    total: int

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.int64)
        if np.any(w <= 0):
            raise DatasetValidationError("every feature weight must be positive")
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "total", int(self.total))


def observation_weights(ds: IncompleteDataset) -> ObservationWeights:
    w = ds.mask.sum(axis=0).astype(np.int64)
    return ObservationWeights(w=w, total=int(w.sum()))


# --------------------------------------------------------------------------- CSV


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(
    path,
    missing_token: str = "?",
    has_labels: bool = False,
) -> IncompleteDataset:
    """Read a comma-separated table into an :class:`IncompleteDataset`.

    Cells equal to ``missing_token`` or empty are unobserved. A first row that
    contains a non-numeric, non-missing feature cell is taken as a header.
    With ``has_labels`` the last column is read as an opaque class label.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise DatasetFormatError(f"{path}: file is empty")

    header = None
    first = rows[0][:-1] if has_labels else rows[0]
    if any(c not in ("", missing_token) and not _is_number(c) for c in first):
        header, rows = rows[0], rows[1:]
    if len(rows) < 2:
        raise DatasetFormatError(f"{path}: need at least 2 data rows, got {len(rows)}")

    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DatasetFormatError(
                f"{path}: row {r + 1} has {len(row)} columns, expected {width}"
            )
    if header is not None and len(header) != width:
        raise DatasetFormatError(f"{path}: header has {len(header)} columns, expected {width}")

    n_feat = width - 1 if has_labels else width
    if n_feat < 1:
        raise DatasetFormatError(f"{path}: no feature columns")
    values = np.full((len(rows), n_feat), np.nan)
    labels = [] if has_labels else None
    for r, row in enumerate(rows):
        for c in range(n_feat):
            tok = row[c]
            if tok == "" or tok == missing_token:
                continue
            try:
                values[r, c] = float(tok)
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: cannot parse {tok!r} at row {r + 1}, column {c + 1}"
                ) from None
            if not math.isfinite(values[r, c]):
                raise DatasetFormatError(
                    f"{path}: non-finite value {tok!r} at row {r + 1}, column {c + 1}"
                )
        if has_labels:
            labels.append(row[-1])

    feature_names = header[:n_feat] if header is not None else None
    return IncompleteDataset(values, labels=labels, feature_names=feature_names)


def write_csv(ds: IncompleteDataset, path, missing_token: str = "?", header: bool = None) -> None:
    """Write ``ds`` in the format :func:`load_csv` reads.

    Floats are written with ``repr`` so a reload is bit-exact. A header is
    written when the dataset has feature names (or when ``header`` is True).
    """
    if header is None:
        header = ds.feature_names is not None
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            names = list(ds.feature_names or [f"f{l}" for l in range(ds.m)])
            if ds.labels is not None:
                names.append("label")
            writer.writerow(names)
        for i in range(ds.n):
            row = [repr(float(v)) if ok else missing_token for v, ok in zip(ds.values[i], ds.mask[i])]
            if ds.labels is not None:
                row.append(ds.label_names[ds.labels[i]])
            writer.writerow(row)


# --------------------------------------------------------------------- z-scoring


@dataclass(frozen=True)
class ZScoreStats:
    """Per-feature centre and scale; ``scale`` is 1 for zero-spread features."""

    mean: np.ndarray
    scale: np.ndarray


def zscore_stats(ds: IncompleteDataset) -> ZScoreStats:
    counts = ds.mask.sum(axis=0)
    x = ds.filled(0.0)
    mean = x.sum(axis=0) / counts
    dev = np.where(ds.mask, ds.values - mean, 0.0)
    sd = np.sqrt((dev**2).sum(axis=0) / counts)
    # features with < 2 observations or no spread are centred but not scaled
    scale = np.where((counts >= 2) & (sd > 0), sd, 1.0)
    return ZScoreStats(mean=mean, scale=scale)


def normalize_zscore(ds: IncompleteDataset, stats: ZScoreStats = None) -> IncompleteDataset:
    """Centre and scale each feature using its observed cells only.

    Uses the population standard deviation; zero-spread features are only centred.
    """
    stats = zscore_stats(ds) if stats is None else stats
    return ds._replace(values=(ds.values - stats.mean) / stats.scale)


def denormalize_zscore(ds: IncompleteDataset, stats: ZScoreStats) -> IncompleteDataset:
    return ds._replace(values=ds.values * stats.scale + stats.mean)


# ------------------------------------------------------------------ bundled data


def bundled_path(name: str) -> Path:
    """Path of a CSV shipped with the package, e.g. ``"iris"``."""
    path = Path(str(resources.files("fwpd") / "data" / f"{name}.csv"))
    if not path.exists():
        raise FileNotFoundError(f"no bundled dataset named {name!r}")
    return path


def load_iris() -> IncompleteDataset:
    """The 150 x 4 iris measurements with species labels."""
    return load_csv(bundled_path("iris"), has_labels=True)
