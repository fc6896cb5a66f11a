import numpy as np
import pytest

from gattrim.clustering import SemanticClustering, supervised_clusters
from gattrim.errors import ClusterRangeError, ConfigError, SizeMismatchError
from gattrim.graph import add_self_loops, make_graph, make_split
from gattrim.models import ClusterAttention, TrainConfig, build_model
from gattrim.synth import generate_synthetic
from gattrim.trimming import (
    RETAINED_NONE,
    TotalEffectTable,
    cluster_presence,
    finetune_attention,
    intervene_cluster,
    run_trim_pipeline,
    total_effect,
    trim_graph,
)


def hand12():
    """12 undirected nodes, 3 balanced classes, mixed intra/inter edges."""
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2])
    pairs = np.array([
        (0, 1), (0, 4), (0, 8), (1, 2), (1, 5), (2, 3), (2, 9), (3, 6),
        (4, 5), (4, 10), (5, 6), (6, 7), (7, 8), (7, 11), (8, 9), (9, 10),
        (10, 11), (3, 11),
    ])
    rng = np.random.default_rng(3)
    features = rng.normal(size=(12, 6))
    return make_graph(12, 3, pairs[:, 0], pairs[:, 1], features, labels,
                      undirected=True, symmetrize=True)


def small_world():
    g = generate_synthetic(num_nodes=40, num_classes=3, feature_dim=8,
                           target_homophily=0.3, avg_degree=4.0,
                           class_separation=2.0, seed=11)
    return g, make_split(g, seed=5)


def quick_cfg(**kw):
    base = dict(hidden_dim=8, heads=2, max_epochs=12, patience=4,
                finetune_max_epochs=5, seed=21)
    base.update(kw)
    return TrainConfig(**base)


def record_set(g):
    return set(zip(g.src.tolist(), g.dst.tolist()))


# ---------------------------------------------------------------- intervene


def directed4():
    labels = np.array([0, 0, 1, 1])
    src = np.array([0, 1, 2, 3, 1, 2, 3, 0])
    dst = np.array([0, 1, 2, 3, 0, 0, 2, 3])
    features = np.eye(4)
    return make_graph(4, 2, src, dst, features, labels, undirected=False)


def test_intervene_directed_removes_sources_only():
    g = directed4()
    sc = supervised_clusters(g.labels)
    out = intervene_cluster(g, sc, 1)
    # sources 2 and 3 silenced; the edge 0 -> 3 INTO cluster 1 survives
    assert record_set(out) == {(0, 0), (1, 1), (2, 2), (3, 3), (1, 0), (0, 3)}
    assert not out.undirected


def test_intervene_undirected_removes_pairs():
    g = add_self_loops(hand12())
    sc = supervised_clusters(g.labels)
    out = intervene_cluster(g, sc, 0)
    proper = out.src != out.dst
    touches = (g.labels[out.src[proper]] == 0) | (g.labels[out.dst[proper]] == 0)
    assert not touches.any()
    assert out.undirected
    assert record_set(out) <= record_set(g)
    assert out.num_self_loops == g.num_nodes
    # symmetric pair removal: reverse of every kept record is kept
    assert record_set(out) == {(d, s) for s, d in record_set(out)}


def test_intervene_empty_cluster_is_identity():
    g = add_self_loops(hand12())
    sc = supervised_clusters(g.labels, num_classes=4)
    assert intervene_cluster(g, sc, 3) is g


def test_intervene_range_and_size_errors():
    g = directed4()
    sc = supervised_clusters(g.labels)
    with pytest.raises(ClusterRangeError):
        intervene_cluster(g, sc, 2)
    with pytest.raises(ClusterRangeError):
        intervene_cluster(g, sc, -1)
    short = SemanticClustering(assignment=np.zeros(3, dtype=np.int64),
                               num_clusters=1, centers=None, mode="sup")
    with pytest.raises(SizeMismatchError):
        intervene_cluster(g, short, 0)


def test_cluster_presence_counts_nonself_sources():
    g = add_self_loops(directed4())
    present = cluster_presence(g, g.labels, 2)
    # in-records: 1->0, 2->0, 3->2, 0->3 (self-loops excluded)
    expected = np.array([[True, True],
                         [False, False],
                         [False, True],
                         [True, False]])
    assert np.array_equal(present, expected)


# ----------------------------------------------------------------- finetune


def test_finetune_freezes_feature_transforms():
    g, split = small_world()
    cfg = quick_cfg()
    gm = add_self_loops(g)
    pre = build_model("gat", gm, cfg, seed=90)
    before = [t.values.copy() for t in pre.all_tensors()]

    tuned, rec = finetune_attention(pre, gm, split, cfg, reinit_seed=17,
                                    rng=np.random.default_rng(4))
    for frozen, kept in zip(pre.W, tuned.W):
        for a, b in zip(frozen, kept):
            assert np.array_equal(a.values, b.values)
    assert any(not np.array_equal(a.values, b.values)
               for fa, fb in zip(pre.W2, tuned.W2)
               for a, b in zip(fa, fb))
    # the input params are never mutated
    for t, old in zip(pre.all_tensors(), before):
        assert np.array_equal(t.values, old)
    assert rec.epochs_run >= 1


def test_finetune_null_effect_is_exactly_zero():
    g, split = small_world()
    cfg = quick_cfg()
    gm = add_self_loops(g)
    pre = build_model("gatv2", gm, cfg, seed=90)
    sc = supervised_clusters(gm.labels)

    worlds = []
    for _ in range(2):
        tuned, _ = finetune_attention(pre, gm, split, cfg, reinit_seed=17,
                                      rng=np.random.default_rng(4))
        from gattrim.models import extract_attention
        worlds.append(extract_attention(tuned, gm, sc))
    te = total_effect(worlds[0], worlds[1])
    assert np.all(te == 0.0)


def test_total_effect_shape_mismatch():
    a = ClusterAttention(alpha_sc=np.zeros((3, 2)), alpha_self=np.zeros(3))
    b = ClusterAttention(alpha_sc=np.zeros((4, 2)), alpha_self=np.zeros(4))
    with pytest.raises(SizeMismatchError):
        total_effect(a, b)


# --------------------------------------------------------------------- trim


def trim_fixture():
    labels = np.array([0, 0, 1, 1, 0])
    src = np.array([0, 1, 2, 3, 4, 1, 2, 3])
    dst = np.array([0, 1, 2, 3, 4, 0, 0, 1])
    g = make_graph(5, 2, src, dst, np.zeros((5, 2)), labels, undirected=False)
    sc = supervised_clusters(labels)
    te = TotalEffectTable(
        te_self=np.array([[-0.2, 0.1],
                          [0.3, -0.4],
                          [0.0, 0.0],
                          [0.0, 0.0],
                          [0.0, 0.0]]),
        present_mask=np.array([[True, True],
                               [False, True],
                               [False, False],
                               [False, False],
                               [False, False]]))
    return g, sc, te


def test_trim_low_and_high_selection():
    g, sc, te = trim_fixture()
    low = trim_graph(g, sc, te, "low_distraction")
    assert low.retained_cluster.tolist() == [0, 1, -1, -1, -1]
    assert record_set(low.graph) == {(0, 0), (1, 1), (2, 2), (3, 3), (4, 4),
                                     (1, 0), (3, 1)}
    high = trim_graph(g, sc, te, "high_distraction")
    assert high.retained_cluster.tolist() == [1, 1, -1, -1, -1]
    assert record_set(high.graph) == {(0, 0), (1, 1), (2, 2), (3, 3), (4, 4),
                                      (2, 0), (3, 1)}
    assert not low.graph.undirected


def test_trim_ties_take_lowest_cluster():
    g, sc, te = trim_fixture()
    tied = TotalEffectTable(te_self=np.full((5, 2), 0.5),
                            present_mask=te.present_mask)
    for mode in ("low_distraction", "high_distraction"):
        out = trim_graph(g, sc, tied, mode)
        assert out.retained_cluster[0] == 0


def test_trim_mode_duality():
    rng = np.random.default_rng(8)
    g = add_self_loops(hand12())
    sc = supervised_clusters(g.labels)
    te_self = rng.normal(size=(12, 3))
    present = rng.random((12, 3)) < 0.7
    present[5] = False
    te = TotalEffectTable(te_self=te_self, present_mask=present)
    neg = TotalEffectTable(te_self=-te_self, present_mask=present)
    low = trim_graph(g, sc, te, "low_distraction")
    high = trim_graph(g, sc, neg, "high_distraction")
    assert np.array_equal(low.retained_cluster, high.retained_cluster)
    assert record_set(low.graph) == record_set(high.graph)
    assert low.retained_cluster[5] == RETAINED_NONE


def test_trim_errors():
    g, sc, te = trim_fixture()
    with pytest.raises(ConfigError):
        trim_graph(g, sc, te, "sideways")
    bad = TotalEffectTable(te_self=np.zeros((5, 3)),
                           present_mask=np.zeros((5, 3), dtype=bool))
    with pytest.raises(SizeMismatchError):
        trim_graph(g, sc, bad, "low_distraction")


# ------------------------------------------------- pipeline + oracle checks


def _np_alpha_self(heads_W, heads_W2, x, src, dst, n):
    """Independent first-layer attention read-out: plain numpy, per-node
    softmax loop, heads averaged."""
    acc = np.zeros(n)
    for W, W2 in zip(heads_W, heads_W2):
        p = x @ W
        scores = np.concatenate([p[dst], p[src]], axis=1) @ W2[:, 0]
        scores = np.where(scores > 0.0, scores, 0.2 * scores)
        alpha = np.zeros_like(scores)
        for i in range(n):
            m = dst == i
            e = np.exp(scores[m] - scores[m].max())
            alpha[m] = e / e.sum()
        sel = src == dst
        acc[dst[sel]] += alpha[sel]
    return acc / len(heads_W)


def _np_drop_cluster(src, dst, assignment, c):
    ks, kd = [], []
    for s, d in zip(src, dst):
        if s == d or (assignment[s] != c and assignment[d] != c):
            ks.append(s)
            kd.append(d)
    return np.array(ks), np.array(kd)


def test_pipeline_matches_bruteforce_te_oracle():
    g = hand12()
    split = make_split(g, seed=1)
    cfg = TrainConfig(hidden_dim=4, heads=2, seed=7)
    gm = add_self_loops(g)
    pre = build_model("gat", gm, cfg, seed=123)

    report = run_trim_pipeline(g, split, cfg, "gat", cluster_mode="sup",
                               pretrained=pre, finetune_epochs=0)

    # with a zero-epoch refit every world shares the re-drawn parameters
    heads_W = [t.values for t in report.base_params.W[0]]
    heads_W2 = [t.values for t in report.base_params.W2[0]]
    x = gm.features
    labels = gm.labels
    base = _np_alpha_self(heads_W, heads_W2, x, gm.src, gm.dst, 12)
    for c in range(3):
        s, d = _np_drop_cluster(gm.src, gm.dst, labels, c)
        col = _np_alpha_self(heads_W, heads_W2, x, s, d, 12) - base
        np.testing.assert_allclose(report.te.te_self[:, c], col,
                                   rtol=0.0, atol=1e-8)

    present = np.zeros((12, 3), dtype=bool)
    for s, d in zip(gm.src, gm.dst):
        if s != d:
            present[d, labels[s]] = True
    assert np.array_equal(report.te.present_mask, present)


def test_pipeline_empty_cluster_column_is_zero():
    g = hand12()
    split = make_split(g, seed=1)
    cfg = TrainConfig(hidden_dim=4, heads=2, seed=7)
    gm = add_self_loops(g)
    pre = build_model("gat", gm, cfg, seed=123)
    sc = supervised_clusters(g.labels, num_classes=4)

    report = run_trim_pipeline(g, split, cfg, "gat", clustering=sc,
                               pretrained=pre, finetune_epochs=0)
    assert np.all(report.te.te_self[:, 3] == 0.0)
    assert report.intervened_attention[3] is None
    assert not report.te.present_mask[:, 3].any()
    assert not np.any(report.trimmed.retained_cluster == 3)


def test_pipeline_single_cluster_keeps_every_edge():
    g = hand12()
    split = make_split(g, seed=1)
    cfg = TrainConfig(hidden_dim=4, heads=2, seed=7)
    gm = add_self_loops(g)
    pre = build_model("gat", gm, cfg, seed=123)
    sc = supervised_clusters(np.zeros(12, dtype=np.int64), num_classes=1)

    report = run_trim_pipeline(g, split, cfg, "gat", clustering=sc,
                               pretrained=pre, finetune_epochs=0)
    assert record_set(report.trimmed.graph) == record_set(gm)
    assert np.all(report.trimmed.retained_cluster == 0)


def test_pipeline_deterministic_and_consistent():
    g, split = small_world()
    cfg = quick_cfg(max_epochs=10, finetune_max_epochs=4)

    reports = [run_trim_pipeline(g, split, cfg, "gat", cluster_mode="sup")
               for _ in range(2)]
    a, b = reports
    assert np.array_equal(a.te.te_self, b.te.te_self)
    assert np.array_equal(a.trimmed.retained_cluster, b.trimmed.retained_cluster)
    assert np.array_equal(a.trimmed.graph.src, b.trimmed.graph.src)
    assert np.array_equal(a.trimmed.graph.dst, b.trimmed.graph.dst)
    assert np.array_equal(a.base_attention.alpha_self, b.base_attention.alpha_self)

    gm = add_self_loops(g)
    trimmed = a.trimmed.graph
    retained = a.trimmed.retained_cluster
    assignment = a.clustering.assignment
    # trimmed edges: subset of the original, sources only from the retained
    # cluster, every self-loop still present
    assert record_set(trimmed) <= record_set(gm)
    proper = trimmed.src != trimmed.dst
    assert np.all(assignment[trimmed.src[proper]] == retained[trimmed.dst[proper]])
    assert trimmed.num_self_loops == gm.num_nodes
    # attention identity holds in every extracted world
    for ca in [a.base_attention] + [w for w in a.intervened_attention if w]:
        np.testing.assert_allclose(ca.alpha_self + ca.alpha_sc.sum(axis=1),
                                   np.ones(g.num_nodes), atol=1e-6)


def test_pipeline_reuses_injected_pretraining():
    g, split = small_world()
    cfg = quick_cfg(max_epochs=10, finetune_max_epochs=4)
    gm = add_self_loops(g)
    pre = build_model("gat", gm, cfg, seed=33)
    report = run_trim_pipeline(g, split, cfg, "gat", cluster_mode="sup",
                               pretrained=pre, finetune_epochs=2)
    assert report.pretrain_record is None
    assert report.pretrained is pre
    assert np.all(np.isfinite(report.te.te_self))
