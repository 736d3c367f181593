"""Input validation shared by the estimators and the functional API."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .dataset import IncompleteDataset


def as_dataset(X, labels=None, min_samples: int = 1) -> IncompleteDataset:
    """Coerce ``X`` to an :class:`IncompleteDataset`.

    ``X`` may already be a dataset (returned unchanged unless ``labels`` is
    given) or any 2-D array-like where NaN marks a missing cell.
    """
    if isinstance(X, IncompleteDataset):
        if labels is not None:
            return X._replace(labels=labels, label_names=())
        return X
    arr = check_array(
        X, dtype=np.float64, ensure_all_finite="allow-nan", ensure_min_samples=min_samples
    )
    return IncompleteDataset(arr, labels=labels)


def as_generator(seed) -> np.random.Generator:
    """Turn ``None``, an int, a SeedSequence or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a random generator from {seed!r}")


def check_n_clusters(k, n: int, upper_inclusive: bool = False) -> int:
    if not isinstance(k, numbers.Integral):
        raise TypeError(f"n_clusters must be an integer, got {k!r}")
    k = int(k)
    hi_ok = k <= n if upper_inclusive else k < n
    if k < 1 or not hi_ok:
        bound = f"<= {n}" if upper_inclusive else f"< {n}"
        raise ValueError(f"n_clusters must be >= 1 and {bound}, got {k}")
    return k
