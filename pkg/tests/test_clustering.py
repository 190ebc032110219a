import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score

from netblock import clustering
from netblock.clustering import (
    DegenerateClusterWarning,
    _gmm_em,
    adjusted_rand_index,
    align_labels,
    bias_adjusted_matrix,
    bias_adjusted_spectral,
    cluster_points,
    gmm_cluster,
    kmeans,
    spectral_cluster,
)
from netblock.errors import DataError
from netblock.model import MembershipMatrix, NetworkSample, sample_mono

from oracles import ari_by_hand, exhaustive_misclustering

labelings = st.integers(2, 5).flatmap(
    lambda K: st.tuples(st.just(K), st.lists(st.integers(0, K - 1), min_size=2, max_size=40))
)


def blobs(rng, K, per, dim, spread=10.0):
    centers = rng.standard_normal((K, dim)) * spread
    X = np.concatenate([c + rng.standard_normal((per, dim)) * 0.3 for c in centers])
    return X, np.repeat(np.arange(K), per)


# -- k-means and GMM ----------------------------------------------------------

def test_kmeans_each_point_its_own_cluster(rng):
    X = rng.standard_normal((6, 2))
    labels = kmeans(X, 6)
    assert np.unique(labels).size == 6


def test_kmeans_two_groups_in_one_dimension():
    labels = kmeans(np.array([0.0, 0.1, 10.0, 10.1]), 2)
    assert labels[0] == labels[1] and labels[2] == labels[3] and labels[0] != labels[2]


def test_kmeans_warns_on_identical_points():
    with pytest.warns(DegenerateClusterWarning):
        kmeans(np.ones((5, 2)), 2)


def test_kmeans_agrees_with_sklearn(rng):
    X, truth = blobs(rng, 4, 30, 3)
    ours = kmeans(X, 4, seed=1)
    ref = KMeans(4, n_init=10, random_state=0).fit_predict(X)
    assert adjusted_rand_index(ours, ref) == 1.0
    assert adjusted_rand_index(ours, truth) == 1.0


def test_kmeans_rejects_too_many_clusters():
    with pytest.raises(DataError):
        kmeans(np.zeros((2, 1)), 3)


def test_gmm_single_component():
    assert np.array_equal(gmm_cluster(np.random.default_rng(0).standard_normal((9, 2)), 1), np.zeros(9))


def test_gmm_agrees_with_kmeans_on_separated_blobs(rng):
    X, truth = blobs(rng, 3, 40, 2)
    assert adjusted_rand_index(gmm_cluster(X, 3), kmeans(X, 3)) == 1.0
    assert adjusted_rand_index(gmm_cluster(X, 3), truth) == 1.0


@settings(max_examples=50)
@given(seed=st.integers(0, 2**31), K=st.integers(2, 4))
def test_em_log_likelihood_nondecreasing(seed, K):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 2)) + rng.integers(0, 3, (40, 1))
    resp = rng.dirichlet(np.ones(K), 40)
    _, trace = _gmm_em(X, resp, 1e-8, 200, 0.0)
    diffs = np.diff(trace)
    assert np.all(diffs >= -1e-9 * np.maximum(1.0, np.abs(trace[1:])))


def test_cluster_points_engine_check(rng):
    with pytest.raises(DataError):
        cluster_points(rng.standard_normal((5, 1)), 2, "agglomerative")


def test_feature_sign_flip_gives_same_partition(rng):
    X, _ = blobs(rng, 3, 20, 3, spread=3.0)
    flipped = X * np.array([-1.0, 1.0, -1.0])
    for engine in ("kmeans", "gmm"):
        a = cluster_points(X, 3, engine, seed=4)
        b = cluster_points(flipped, 3, engine, seed=4)
        assert align_labels(a, b, 3).misclustering_rate == 0.0


# -- spectral methods ---------------------------------------------------------

def test_disconnected_cliques():
    A = np.zeros((10, 10))
    A[:4, :4] = 1
    A[4:, 4:] = 1
    for engine in ("gmm", "kmeans"):
        labels = spectral_cluster(A, 2, 2, engine).labels
        assert len(set(labels[:4])) == 1 and len(set(labels[4:])) == 1 and labels[0] != labels[4]


def test_noiseless_blocks_zero_misclustering():
    B = np.array([[0.9, 0.1, 0.3], [0.1, 0.7, 0.2], [0.3, 0.2, 0.5]])
    Z = MembershipMatrix(np.random.default_rng(3).integers(0, 3, 45), 3)
    Y = B[np.ix_(Z.labels, Z.labels)]
    res = spectral_cluster(Y, 3, 3)
    assert align_labels(res.labels, Z.labels, 3).misclustering_rate == 0.0
    assert res.membership.K == 3


def test_bias_adjusted_two_node_example():
    s = NetworkSample(2, ((np.array([0]), np.array([1])),), 1.0)
    assert not np.any(bias_adjusted_matrix(s))


def test_bias_adjusted_matrix_matches_dense(rng):
    Z = MembershipMatrix(rng.integers(0, 2, 15), 2)
    s = sample_mono([[0.5, 0.2], [0.2, 0.6]], Z, 1.0, 3, seed=5)
    ref = sum(s.dense(l) @ s.dense(l) - np.diag(s.dense(l).sum(axis=1)) for l in range(3))
    S = bias_adjusted_matrix(s)
    assert np.array_equal(S, ref)
    assert np.array_equal(S, S.T)


def test_bias_adjusted_invariant_to_layer_order():
    Z = MembershipMatrix.from_sizes([30, 30, 40])
    B = np.array([[0.6, 0.1, 0.2], [0.1, 0.5, 0.1], [0.2, 0.1, 0.7]])
    s = sample_mono(B, Z, 0.2, 6, seed=8)
    order = [3, 1, 5, 0, 2, 4]
    a = bias_adjusted_spectral(s, 3, seed=2).labels
    b = bias_adjusted_spectral(s.subset(order), 3, seed=2).labels
    assert np.array_equal(a, b)
    assert adjusted_rand_index(a, Z.labels) > 0.9


# -- alignment and ARI --------------------------------------------------------

def test_alignment_examples():
    r = align_labels([1, 1, 0, 0], [0, 0, 1, 1], 2)
    assert r.permutation.tolist() == [1, 0] and r.misclustering_rate == 0.0
    r = align_labels([0, 1, 2, 2], [0, 1, 2, 2], 3)
    assert r.permutation.tolist() == [0, 1, 2] and r.misclustering_rate == 0.0
    assert align_labels([0, 0, 0, 1], [0, 0, 1, 1], 2).misclustering_rate == 0.25
    with pytest.raises(DataError):
        align_labels([0, 1], [0, 1, 1], 2)
    with pytest.raises(DataError):
        align_labels([0, 2], [0, 1], 2)


@settings(max_examples=200)
@given(data=labelings, seed=st.integers(0, 2**31), use_assignment=st.booleans())
def test_alignment_matches_exhaustive_search(data, seed, use_assignment):
    K, g = data
    g = np.array(g)
    g_hat = np.random.default_rng(seed).integers(0, K, g.size)
    old = clustering.EXHAUSTIVE_MAX_K
    try:
        if use_assignment:
            clustering.EXHAUSTIVE_MAX_K = 0
        r = align_labels(g_hat, g, K)
    finally:
        clustering.EXHAUSTIVE_MAX_K = old
    assert r.misclustering_rate == pytest.approx(exhaustive_misclustering(g_hat, g, K))
    assert sorted(r.permutation.tolist()) == list(range(K))
    assert np.array_equal(r.aligned, r.permutation[g_hat])


def test_alignment_large_K_uses_matching():
    rng = np.random.default_rng(0)
    g = rng.integers(0, 12, 200)
    perm = rng.permutation(12)
    g_hat = np.argsort(perm)[g]  # relabeled copy of g
    r = align_labels(g_hat, g, 12)
    assert r.misclustering_rate == 0.0


def test_ari_examples():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)
    assert adjusted_rand_index([0, 1, 2, 3], [0, 0, 0, 0]) == pytest.approx(0.0)
    with pytest.raises(DataError):
        adjusted_rand_index([0], [0])


@settings(max_examples=100)
@given(data=labelings, seed=st.integers(0, 2**31))
def test_ari_matches_references_and_is_symmetric(data, seed):
    K, a = data
    a = np.array(a)
    rng = np.random.default_rng(seed)
    b = rng.integers(0, K, a.size)
    val = adjusted_rand_index(a, b)
    assert val == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
    assert val == pytest.approx(ari_by_hand(a, b), abs=1e-12)
    assert val == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
    relabel = rng.permutation(K)
    assert val == pytest.approx(adjusted_rand_index(relabel[a], b), abs=1e-12)
