import numpy as np
import pytest

from gattrim.clustering import (
    SemanticClustering,
    adjusted_rand_index,
    aggregate_center_distance,
    cluster_centers,
    kmeans_pp,
    mlp_pseudolabels,
    random_clusters,
    supervised_clusters,
)
from gattrim.errors import (
    ClusterCountError,
    EmptyClusterError,
    EmptyIndexError,
    LengthMismatchError,
    UnknownLabelError,
)
from gattrim.graph import make_graph, make_split
from gattrim.models import TrainConfig


def blobs(n_per=30, k=3, dim=4, gap=12.0, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.zeros((k, dim))
    for c in range(k):
        centers[c, c % dim] = gap * (1 + c)
    labels = np.repeat(np.arange(k), n_per)
    x = centers[labels] + rng.normal(size=(n_per * k, dim))
    return x, labels


# ---------------------------------------------------------------- ARI oracle


def test_ari_identical_and_relabeled():
    a = np.array([0, 0, 1, 1, 2])
    assert adjusted_rand_index(a, a) == 1.0
    relabeled = np.array([2, 2, 0, 0, 1])
    assert adjusted_rand_index(a, relabeled) == 1.0


def test_ari_hand_pair_count():
    # contingency of all-ones: ARI = (0 - 2/3) / (2 - 2/3) = -0.5
    a = np.array([0, 0, 1, 1])
    b = np.array([0, 1, 0, 1])
    assert adjusted_rand_index(a, b) == pytest.approx(-0.5)
    assert adjusted_rand_index(a, b) <= 0.0


def test_ari_degenerate_partitions():
    assert adjusted_rand_index([0, 0, 0], [0, 0, 0]) == 1.0
    assert adjusted_rand_index([5], [2]) == 1.0


def test_ari_length_mismatch():
    with pytest.raises(LengthMismatchError):
        adjusted_rand_index([0, 1], [0, 1, 2])


def test_ari_matches_sklearn_on_random_pairs():
    sklearn_metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(5, 60))
        a = rng.integers(0, 4, size=n)
        b = rng.integers(0, 3, size=n)
        ours = adjusted_rand_index(a, b)
        theirs = sklearn_metrics.adjusted_rand_score(a, b)
        assert ours == pytest.approx(theirs, abs=1e-12)


# ------------------------------------------------------------------- centers


def test_centers_mean_and_identity():
    feats = np.array([[0.0, 0.0], [2.0, 2.0], [5.0, 1.0]])
    centers = cluster_centers(feats, np.array([0, 0, 1]))
    np.testing.assert_allclose(centers, [[1.0, 1.0], [5.0, 1.0]])


def test_centers_empty_cluster_named():
    with pytest.raises(EmptyClusterError) as e:
        cluster_centers(np.zeros((2, 2)), np.array([0, 2]), num_clusters=3)
    assert e.value.cluster == 1


def test_centers_length_mismatch():
    with pytest.raises(LengthMismatchError):
        cluster_centers(np.zeros((3, 2)), np.array([0, 1]))


def test_centers_within_sampling_error_of_generators():
    x, labels = blobs(n_per=200, k=3, dim=4, gap=10.0, seed=1)
    centers = cluster_centers(x, labels)
    true = np.zeros((3, 4))
    for c in range(3):
        true[c, c % 4] = 10.0 * (1 + c)
    bound = 3.0 / np.sqrt(200)  # 3 sigma / sqrt(n), sigma = 1 per coordinate
    assert np.all(np.abs(centers - true) < bound * 3)


# ------------------------------------------------------------------ k-means++


def test_kmeans_separable_blobs_perfect_ari():
    x, labels = blobs(seed=2)
    sc = kmeans_pp(x, 3, seed=0)
    assert adjusted_rand_index(sc.assignment, labels) == 1.0
    assert sc.mode == "unsup"
    assert sc.num_clusters == 3


def test_kmeans_k1_center_is_global_mean():
    x, _ = blobs(seed=3)
    sc = kmeans_pp(x, 1, seed=0)
    assert np.all(sc.assignment == 0)
    np.testing.assert_allclose(sc.centers[0], x.mean(axis=0), atol=1e-9)


def test_kmeans_deterministic():
    x, _ = blobs(seed=4)
    a = kmeans_pp(x, 3, seed=5)
    b = kmeans_pp(x, 3, seed=5)
    np.testing.assert_array_equal(a.assignment, b.assignment)


def test_kmeans_centers_match_assignment_means():
    x, _ = blobs(seed=5)
    sc = kmeans_pp(x, 4, seed=1)
    for c in range(4):
        np.testing.assert_allclose(sc.centers[c],
                                   x[sc.assignment == c].mean(axis=0),
                                   atol=1e-9)


def test_kmeans_objective_non_increasing():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(120, 6))
    objective = []
    kmeans_pp(x, 5, seed=2, objective_out=objective)
    assert len(objective) >= 1
    assert all(b <= a + 1e-9 for a, b in zip(objective, objective[1:]))


def test_kmeans_duplicate_points_fill_all_clusters():
    x = np.zeros((6, 2))
    x[5] = [1.0, 0.0]
    sc = kmeans_pp(x, 3, seed=0)
    assert np.bincount(sc.assignment, minlength=3).min() >= 1


def test_kmeans_k_bounds():
    with pytest.raises(ClusterCountError):
        kmeans_pp(np.zeros((3, 2)), 4, seed=0)
    with pytest.raises(ClusterCountError):
        kmeans_pp(np.zeros((3, 2)), 0, seed=0)


def test_kmeans_l2_normalization_mode():
    # direction separates the groups, magnitude opposes it
    x = np.array([[1.0, 0.0], [30.0, 0.5], [0.0, 1.0], [0.4, 25.0]])
    sc = kmeans_pp(x, 2, seed=0, normalize="l2")
    assert sc.assignment[0] == sc.assignment[1]
    assert sc.assignment[2] == sc.assignment[3]
    assert sc.assignment[0] != sc.assignment[2]


# ----------------------------------------------------------------- MLP labels


def mlp_cfg(**over):
    base = dict(hidden_dim=16, heads=1, layers=1, dropout=0.0, lr=0.01,
                max_epochs=150, patience=20, seed=0)
    base.update(over)
    return TrainConfig(**base)


def fake_split(n, seed=0, ratios=(0.6, 0.2, 0.2)):
    g = make_graph(n, 1, [], [], np.zeros((n, 1)), [0] * n, True)
    return make_split(g, ratios, seed=seed)


def test_mlp_separable_high_ari():
    x, labels = blobs(n_per=40, k=3, gap=10.0, seed=7)
    split = fake_split(120, seed=0)
    sc = mlp_pseudolabels(x, labels, split, mlp_cfg())
    assert adjusted_rand_index(sc.assignment, labels) > 0.95
    assert sc.mode == "semi"


def test_mlp_train_nodes_keep_true_labels():
    x, labels = blobs(n_per=20, k=2, gap=1.0, seed=8)  # barely separable
    split = fake_split(40, seed=1)
    sc = mlp_pseudolabels(x, labels, split, mlp_cfg(max_epochs=5))
    np.testing.assert_array_equal(sc.assignment[split.train],
                                  labels[split.train])


def test_mlp_constant_features_collapse_to_majority():
    x = np.ones((30, 3))
    labels = np.array([0] * 20 + [1] * 10)
    split = fake_split(30, seed=2)
    sc = mlp_pseudolabels(x, labels, split, mlp_cfg(max_epochs=60),
                          num_classes=2)
    majority = np.argmax(np.bincount(labels[split.train]))
    outside = np.setdiff1d(np.arange(30), split.train)
    assert np.all(sc.assignment[outside] == majority)


def test_mlp_empty_train_rejected():
    x = np.zeros((10, 2))
    split = fake_split(10, ratios=(0.0, 0.5, 0.5))
    with pytest.raises(EmptyIndexError):
        mlp_pseudolabels(x, np.zeros(10, dtype=int), split, mlp_cfg())


def test_mlp_unknown_train_label_rejected():
    x = np.zeros((10, 2))
    split = fake_split(10)
    labels = np.zeros(10, dtype=int)
    labels[split.train[0]] = -1
    with pytest.raises(UnknownLabelError):
        mlp_pseudolabels(x, labels, split, mlp_cfg())


# ------------------------------------------------------- sup / random modes


def test_supervised_identity():
    labels = np.array([0, 1, 2, 1])
    sc = supervised_clusters(labels)
    np.testing.assert_array_equal(sc.assignment, labels)
    assert sc.mode == "sup"
    assert sc.num_clusters == 3


def test_supervised_single_class():
    sc = supervised_clusters(np.zeros(5, dtype=int))
    assert sc.num_clusters == 1
    assert np.bincount(sc.assignment).tolist() == [5]


def test_supervised_rejects_unknown():
    with pytest.raises(UnknownLabelError):
        supervised_clusters(np.array([0, -1]))


def test_random_clusters_deterministic_and_in_range():
    a = random_clusters(50, 4, seed=3)
    b = random_clusters(50, 4, seed=3)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    assert a.mode == "random"
    assert a.assignment.min() >= 0 and a.assignment.max() < 4


# ------------------------------------------- self-weight distance monotonicity


def test_aggregate_distance_decreases_with_self_weight():
    rng = np.random.default_rng(9)
    centers = np.array([[0.0, 0.0, 8.0], [8.0, 0.0, 0.0], [0.0, 8.0, 0.0]])
    # ideal semantic space: representations sit exactly on their centers
    neighbor_clusters = np.array([1, 1, 2])
    neighbors = centers[neighbor_clusters]
    weights = rng.uniform(0.1, 1.0, size=3)
    own = centers[0]
    ws = np.linspace(0.0, 0.999, 40)
    dists = [aggregate_center_distance(neighbors, weights, own, centers[0], w)
             for w in ws]
    assert all(b < a for a, b in zip(dists, dists[1:]))
    # closed form: (1 - w) * ||mix - center||
    mix = (weights / weights.sum()) @ neighbors
    expected = (1.0 - ws) * np.linalg.norm(mix - centers[0])
    np.testing.assert_allclose(dists, expected, atol=1e-12)
