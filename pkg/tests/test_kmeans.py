import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from conftest import (
    centroids_are_member_means,
    no_repeat_between_adjustments,
    point_centroid_oracle,
    random_masked,
    single_move_gain,
)
from fwpd.dataset import IncompleteDataset
from fwpd.dissimilarity import DissimilarityContext
from fwpd.kmeans import (
    CentroidSet,
    EmptyClusterError,
    KMeansFWPD,
    assign,
    detect_feasibility_adjustment,
    dissimilarities,
    final_centroids,
    init_random,
    objective,
    run,
    standard_kmeans,
    update_centroids,
)


def test_init_deterministic_and_nonempty():
    a = init_random(6, 2, seed=4)
    assert np.array_equal(a, init_random(6, 2, seed=4))
    assert set(a) == {0, 1}


def test_init_k_equals_n():
    labels = init_random(5, 5, seed=0)
    assert sorted(labels) == [0, 1, 2, 3, 4]


def test_init_occupancy_is_uniform():
    rng = np.random.default_rng(0)
    counts = np.array([np.bincount(init_random(20, 4, rng), minlength=4) for _ in range(10_000)])
    # binomial(20, 1/4) sd is sqrt(3.75); mean of 10^4 draws has sd ~0.019
    assert np.all(np.abs(counts.mean(axis=0) - 5) < 3 * np.sqrt(3.75 / 10_000))


def test_init_rejects_bad_k():
    with pytest.raises(ValueError):
        init_random(5, 1)
    with pytest.raises(ValueError):
        init_random(5, 6)


def test_centroid_of_worked_pair(worked):
    Z = update_centroids(worked, np.array([0, 1, 1, 0, 1]))
    np.testing.assert_allclose(Z.values[0], [2.1, 3.0, 1.5])
    assert Z.gamma(0) == {0, 1, 2}


def test_singleton_complete_centroid():
    x = np.arange(6.0).reshape(3, 2)
    Z = update_centroids(IncompleteDataset(x), np.array([0, 1, 1]))
    np.testing.assert_array_equal(Z.values[0], x[0])


def test_centroid_carryover():
    ds = IncompleteDataset(np.array([[np.nan, 5.0], [1.0, 2.0], [3.0, 4.0]]))
    prev = CentroidSet(np.array([[7.0, 1.0], [2.0, 3.0]]), np.array([[True, True], [True, True]]))
    Z = update_centroids(ds, np.array([0, 1, 1]), prev)
    assert Z.values[0, 0] == 7.0  # no member observes feature 0
    assert Z.values[0, 1] == 5.0
    Zf = final_centroids(ds, np.array([0, 1, 1]))
    assert Zf.gamma(0) == {1}


def test_empty_cluster_signalled(worked):
    with pytest.raises(EmptyClusterError):
        update_centroids(worked, np.zeros(5, dtype=int), k=2)


def test_assign_single_centroid(worked):
    ctx = DissimilarityContext.from_dataset(worked, 0.5)
    Z = update_centroids(worked, np.zeros(5, dtype=int))
    assert assign(worked, ctx, Z).tolist() == [0] * 5


def test_assign_tie_goes_to_lowest():
    ds = IncompleteDataset(np.array([[0.0], [2.0], [-2.0], [10.0]]))
    ctx = DissimilarityContext.from_dataset(ds, 0.5)
    Z = CentroidSet(np.array([[10.0], [1.0], [-1.0]]), np.ones((3, 1), bool))
    assert assign(ds, ctx, Z)[0] == 1


def test_dissimilarities_match_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        ds = random_masked(rng, 8, 4)
        ctx = DissimilarityContext.from_dataset(ds, rng.uniform(0.05, 0.95))
        Z = update_centroids(ds, init_random(8, 2, rng))
        np.testing.assert_allclose(dissimilarities(ds, ctx, Z), point_centroid_oracle(ctx, ds, Z), atol=1e-12)
        assert np.array_equal(assign(ds, ctx, Z), np.argmin(point_centroid_oracle(ctx, ds, Z), axis=1))


def test_objective_singletons_zero():
    x = np.random.default_rng(0).normal(size=(4, 3))
    ds = IncompleteDataset(x)
    ctx = DissimilarityContext.from_dataset(ds, 0.5)
    labels = np.arange(4)
    assert objective(ds, ctx, labels, final_centroids(ds, labels)) == 0.0


def test_objective_hand_evaluation(worked):
    # x2 and x4 in one cluster, the rest elsewhere
    ctx = DissimilarityContext.from_dataset(worked, 0.25)
    labels = np.array([1, 0, 1, 0, 1])
    Z = final_centroids(worked, labels)
    z = np.array([(1.2 + 2.1) / 2, 3.0, (4.0 + 1.0) / 2])
    d2 = np.sqrt((1.2 - z[0]) ** 2 + (4.0 - z[2]) ** 2)
    d4 = np.linalg.norm(np.array([2.1, 3.0, 1.0]) - z)
    expected = 0.75 * (d2 + d4) / 4.1 + 0.25 * (3 / 10 + 0)
    D = dissimilarities(worked, ctx, Z)
    assert D[1, 0] + D[3, 0] == pytest.approx(expected, abs=1e-12)


def test_detect_adjustment():
    a = CentroidSet(np.zeros((2, 3)), np.array([[1, 1, 1], [1, 0, 1]], bool))
    b = CentroidSet(np.zeros((2, 3)), np.array([[1, 1, 1], [1, 1, 1]], bool))
    assert detect_feasibility_adjustment(a, a) == []
    assert detect_feasibility_adjustment(a, b) == [(1, frozenset({1}))]


def test_two_blobs_recovered():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 0.1, (4, 2)), rng.normal(5, 0.1, (4, 2))])
    ds = IncompleteDataset(x)
    ctx = DissimilarityContext.from_dataset(ds, 0.25)
    res = run(ds, ctx, 2, init=[0, 1, 0, 1, 0, 1, 0, 1])
    assert len(set(res.labels[:4])) == 1 and len(set(res.labels[4:])) == 1
    assert res.labels[0] != res.labels[4]
    best = min(
        objective(ds, ctx, u, final_centroids(ds, u, 2))
        for u in (np.array(bits) for bits in itertools.product((0, 1), repeat=8))
        if 0 < u.sum() < 8
    )
    assert res.objective == pytest.approx(best, abs=1e-12)


def test_replicated_points_zero_objective():
    base = np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 9.0]])
    ds = IncompleteDataset(np.repeat(base, 3, axis=0))
    ctx = DissimilarityContext.from_dataset(ds, 0.5)
    res = run(ds, ctx, 3, init=[0, 0, 0, 1, 1, 1, 2, 2, 2])
    assert res.objective == 0.0
    assert res.trace.n_iter <= 2


def test_worked_example_partial_optimality(worked):
    ctx = DissimilarityContext.from_dataset(worked, 0.25)
    for seed in range(10):
        res = run(worked, ctx, 2, seed=seed)
        assert res.converged
        assert single_move_gain(worked, ctx, res.labels, res.last_centroids) <= 1e-12
        assert single_move_gain(worked, ctx, res.labels, res.centroids, feasible_only=True) <= 1e-12
        assert centroids_are_member_means(worked, res.labels, res.centroids)


def test_objective_matches_recomputation():
    rng = np.random.default_rng(9)
    ds = random_masked(rng, 30, 5)
    ctx = DissimilarityContext.from_dataset(ds, 0.3)
    res = run(ds, ctx, 3, seed=1)
    assert res.objective == pytest.approx(objective(ds, ctx, res.labels, res.centroids), abs=1e-12)


def test_max_iter_flag():
    rng = np.random.default_rng(1)
    ds = random_masked(rng, 40, 4)
    res = run(ds, DissimilarityContext.from_dataset(ds, 0.3), 3, seed=0, max_iter=1)
    assert res.trace.n_iter == 1
    # one iteration rarely suffices; the flag must mirror the label check
    assert res.converged == np.array_equal(res.trace.assignments[-1], res.trace.assignments[-2])


def test_run_rejects_bad_k(worked):
    ctx = DissimilarityContext.from_dataset(worked, 0.5)
    with pytest.raises(ValueError):
        run(worked, ctx, 5)
    with pytest.raises(ValueError):
        run(worked, ctx, 1)


def test_standard_kmeans_matches_lloyd():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(40, 3))
    init = init_random(40, 3, 7)
    res = standard_kmeans(x, 3, init=init)
    labels = init.copy()
    while True:
        c = np.array([x[labels == j].mean(axis=0) for j in range(3)])
        new = np.argmin(((x[:, None] - c[None]) ** 2).sum(-1), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    assert np.array_equal(res.labels, labels)


def test_standard_kmeans_needs_complete_data(worked):
    with pytest.raises(ValueError):
        standard_kmeans(worked, 2, seed=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(6, 40), st.integers(1, 6), st.integers(2, 5))
def test_run_structural_properties(seed, n, m, k):
    rng = np.random.default_rng(seed)
    ds = random_masked(rng, n, m)
    ctx = DissimilarityContext.from_dataset(ds, rng.uniform(0.05, 0.95))
    res = run(ds, ctx, k, seed=seed)
    tr = res.trace
    assert res.converged
    for before, after in zip(tr.update_objective, tr.assign_objective):
        assert after <= before + 1e-12
    assert tr.n_adjustments <= n * (k - 1)
    assert no_repeat_between_adjustments(tr)
    assert centroids_are_member_means(ds, res.labels, res.centroids)
    assert single_move_gain(ds, ctx, res.labels, res.last_centroids) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_centroids_super_feasible(seed):
    rng = np.random.default_rng(seed)
    ds = random_masked(rng, 15, 4)
    prev = None
    for _ in range(4):
        labels = init_random(15, 3, rng)
        Z = update_centroids(ds, labels, prev)
        for j in range(3):
            union = set().union(*(ds.gamma(i) for i in np.flatnonzero(labels == j)))
            assert union <= Z.gamma(j)
            if prev is not None:
                assert prev.gamma(j) <= Z.gamma(j)
        prev = Z


def test_penalty_independent_of_centroid_values():
    rng = np.random.default_rng(8)
    ds = random_masked(rng, 10, 4)
    ctx = DissimilarityContext.from_dataset(ds, 0.5)
    Z = update_centroids(ds, init_random(10, 2, rng))
    Z2 = CentroidSet(np.where(Z.mask, Z.values + rng.normal(size=Z.values.shape), np.nan), Z.mask)
    from fwpd.dissimilarity import pairwise_penalties

    np.testing.assert_array_equal(
        pairwise_penalties(ctx.weights, ds.mask, Z.mask), pairwise_penalties(ctx.weights, ds.mask, Z2.mask)
    )
    D1, D2 = dissimilarities(ds, ctx, Z), dissimilarities(ds, ctx, Z2)
    dist1 = D1 - ctx.alpha * pairwise_penalties(ctx.weights, ds.mask, Z.mask)
    dist2 = D2 - ctx.alpha * pairwise_penalties(ctx.weights, ds.mask, Z2.mask)
    assert not np.allclose(dist1, dist2)


def test_estimator_api():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 3))
    x[rng.random(x.shape) < 0.2] = np.nan
    x[:, 0] = np.where(np.isnan(x).all(axis=1), 0.0, x[:, 0])
    est = KMeansFWPD(n_clusters=3, alpha=0.3, random_state=0)
    assert est.get_params()["alpha"] == 0.3
    est2 = clone(est)
    labels = est.fit_predict(x)
    assert np.array_equal(labels, est2.fit(x).labels_)
    assert est.transform(x).shape == (30, 3)
    assert np.array_equal(est.predict(x[:5]), np.argmin(est.transform(x[:5]), axis=1))
    assert est.cluster_centers_.shape == (3, 3)
    with pytest.raises(ValueError):
        est.transform(x[:, :2])
