import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_masked
from fwpd.dataset import IncompleteDataset, observation_weights
from fwpd.dissimilarity import (
    DissimilarityContext,
    check_relaxed_triangle,
    fwp,
    fwp_absent,
    fwpd,
    fwpd_absent,
    max_observed_distance,
    min_positive_rho,
    observed_distance,
    pairwise_absent_matrix,
    pairwise_matrix,
    pairwise_penalties,
    read_matrix_csv,
    write_matrix_csv,
)

# printed two-decimal values for the five-point example
A_D = np.array(
    [
        [0, 2, 3.35, 1, 0],
        [2, 0, 3.5, 3.13, 3.2],
        [3.35, 3.5, 0, 3.04, 0],
        [1, 3.13, 3.04, 0, 4.1],
        [0, 3.2, 0, 4.1, 0],
    ]
)
A_P = np.array(
    [
        [0.3, 0.6, 0.3, 0.3, 1],
        [0.6, 0.3, 0.6, 0.3, 0.7],
        [0.3, 0.6, 0.3, 0.3, 1],
        [0.3, 0.3, 0.3, 0, 0.7],
        [1, 0.7, 1, 0.7, 0.7],
    ]
)
A_DBAR = np.array(
    [
        [0, 0.49, 0.82, 0.24, 0],
        [0.49, 0, 0.85, 0.76, 0.78],
        [0.82, 0.85, 0, 0.74, 0],
        [0.24, 0.76, 0.74, 0, 1],
        [0, 0.78, 0, 1, 0],
    ]
)


def brute_rho_min(ds):
    """Smallest positive triple sum, by explicit set arithmetic over ordered triples."""
    w = observation_weights(ds)
    S = set(range(ds.m))
    best = None
    for i, j, k in itertools.permutations(range(ds.n), 3):
        gi, gj, gk = ds.gamma(i), ds.gamma(j), ds.gamma(k)
        rho = sum(
            sum(int(w.w[l]) for l in region)
            for region in ((gi | gk) - gj, (gi & gk) - gj, gj - (gi | gk), S - (gi | gj | gk))
        )
        if rho > 0:
            best = rho if best is None else min(best, rho)
    return None if best is None else best / w.total


def test_observed_distance_examples(worked):
    assert observed_distance(worked, 0, 1) == 2.0
    assert observed_distance(worked, 0, 4) == 0.0
    for i in range(5):
        assert observed_distance(worked, i, i) == 0.0
    with pytest.raises(IndexError):
        observed_distance(worked, 0, 5)


def test_penalty_examples(worked):
    ctx = DissimilarityContext.from_dataset(worked, 0.5)
    assert fwp(ctx, {1, 2}, {0, 2}) == pytest.approx(0.6)
    assert fwp(ctx, {0}, {0}) == pytest.approx(0.7)
    assert fwp(ctx, {0, 1, 2}, {0, 1, 2}) == 0.0


def test_worked_matrices(worked):
    ctx = DissimilarityContext.from_dataset(worked, 0.7)
    n = worked.n
    d = np.array([[observed_distance(worked, i, j) for j in range(n)] for i in range(n)])
    np.testing.assert_allclose(d, A_D, atol=0.005)
    p = pairwise_penalties(ctx.weights, worked.mask)
    np.testing.assert_allclose(p, A_P, atol=1e-12)
    assert ctx.d_max == pytest.approx(4.1, abs=1e-12)
    np.testing.assert_allclose(d / ctx.d_max, A_DBAR, atol=0.005)
    D = pairwise_matrix(ctx, worked)
    np.testing.assert_allclose(np.diag(D), [0.21, 0.21, 0.21, 0.0, 0.49], atol=1e-9)
    # distance term normalized by d_max, as the definition states
    assert D[0, 1] == pytest.approx(0.3 * 2 / 4.1 + 0.7 * 0.6, abs=1e-12)


def test_worked_rho(worked):
    assert min_positive_rho(worked) == pytest.approx(0.3)
    assert brute_rho_min(worked) == pytest.approx(0.3)


def test_worked_relaxed_triangle(worked):
    D = pairwise_matrix(DissimilarityContext.from_dataset(worked, 0.7), worked)
    assert check_relaxed_triangle(D, 0.3, atol=1e-12)


def test_rho_none_when_complete():
    ds = IncompleteDataset(np.random.default_rng(0).normal(size=(5, 3)))
    assert min_positive_rho(ds) is None
    with pytest.raises(ValueError):
        min_positive_rho(IncompleteDataset(np.ones((2, 2))))


def test_max_distance():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(10, 4))
    ds = IncompleteDataset(x)
    brute = max(np.linalg.norm(x[i] - x[j]) for i in range(10) for j in range(10))
    assert max_observed_distance(ds) == pytest.approx(brute, rel=1e-12)
    assert max_observed_distance(IncompleteDataset(np.ones((3, 2)))) == 0.0
    with pytest.raises(ValueError):
        max_observed_distance(IncompleteDataset(np.ones((1, 2))))


def test_zero_dmax_drops_distance_term():
    ds = IncompleteDataset(np.array([[1.0, np.nan], [1.0, 2.0], [1.0, 2.0]]))
    ctx = DissimilarityContext.from_dataset(ds, 0.4)
    assert ctx.d_max == 0.0
    np.testing.assert_allclose(pairwise_matrix(ctx, ds), 0.4 * pairwise_penalties(ctx.weights, ds.mask))


def test_alpha_open_interval(worked):
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            DissimilarityContext.from_dataset(worked, bad)


def test_complete_data_is_scaled_euclidean():
    x = np.random.default_rng(1).normal(size=(12, 3))
    ds = IncompleteDataset(x)
    ctx = DissimilarityContext.from_dataset(ds, 0.3)
    E = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    np.testing.assert_allclose(pairwise_matrix(ctx, ds), 0.7 / E.max() * E, atol=1e-12)
    assert check_relaxed_triangle(pairwise_matrix(ctx, ds), 0.0, atol=1e-12)


def test_absent_penalty_examples():
    assert fwp_absent(np.array([1, 1]), {0}, {1}) == 1.0
    assert fwp_absent(np.array([2, 5, 1]), {0, 2}, {0, 2}) == 0.0


def test_matrix_csv_round_trip(tmp_path, worked):
    D = pairwise_matrix(DissimilarityContext.from_dataset(worked, 0.7), worked)
    write_matrix_csv(D, tmp_path / "m.csv")
    header = (tmp_path / "m.csv").read_text().splitlines()[0]
    assert header == "0,1,2,3,4"
    np.testing.assert_allclose(read_matrix_csv(tmp_path / "m.csv"), D, rtol=1e-11)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 15), st.integers(1, 6), st.floats(0.01, 0.99))
def test_matrix_matches_scalar_form(seed, n, m, alpha):
    ds = random_masked(np.random.default_rng(seed), n, m)
    ctx = DissimilarityContext.from_dataset(ds, alpha)
    D = pairwise_matrix(ctx, ds)
    ref = np.array([[fwpd(ctx, ds, i, j) for j in range(n)] for i in range(n)])
    np.testing.assert_allclose(D, ref, atol=1e-12)
    Da = pairwise_absent_matrix(ctx, ds)
    ref_a = np.array([[fwpd_absent(ctx, ds, i, j) for j in range(n)] for i in range(n)])
    np.testing.assert_allclose(Da, ref_a, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 15), st.integers(1, 6), st.floats(0.01, 0.99))
def test_semimetric_properties(seed, n, m, alpha):
    ds = random_masked(np.random.default_rng(seed), n, m)
    D = pairwise_matrix(DissimilarityContext.from_dataset(ds, alpha), ds)
    assert np.array_equal(D, D.T)
    assert (D >= 0).all() and (D <= 1 + 1e-12).all()
    diag = np.diag(D)
    assert (diag[:, None] <= D + 1e-9).all()
    assert np.array_equal(diag == 0, ds.mask.all(axis=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 7), st.integers(1, 5))
def test_rho_matches_brute_force(seed, n, m):
    ds = random_masked(np.random.default_rng(seed), n, m)
    fast, slow = min_positive_rho(ds), brute_rho_min(ds)
    assert (fast is None) == (slow is None)
    if fast is not None:
        assert fast == pytest.approx(slow, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_absent_penalty_set_oracle(seed, m):
    rng = np.random.default_rng(seed)
    nu = rng.integers(1, 10, size=m)
    gi = {l for l in range(m) if rng.random() < 0.6} or {0}
    gj = {l for l in range(m) if rng.random() < 0.6} or {m - 1}
    sym = (gi - gj) | (gj - gi)
    expected = sum(nu[l] for l in sym) / sum(nu[l] for l in gi | gj)
    assert fwp_absent(nu, gi, gj) == pytest.approx(expected, abs=1e-15)


def test_penalty_ignores_values():
    rng = np.random.default_rng(5)
    ds = random_masked(rng, 8, 4)
    ctx = DissimilarityContext.from_dataset(ds, 0.5)
    other = IncompleteDataset(np.where(ds.mask, rng.normal(size=ds.shape), np.nan))
    np.testing.assert_array_equal(
        pairwise_penalties(ctx.weights, ds.mask), pairwise_penalties(ctx.weights, other.mask)
    )
