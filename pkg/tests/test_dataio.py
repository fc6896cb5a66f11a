import numpy as np
import pytest

from gattrim.dataio import load_graph, save_graph
from gattrim.errors import (
    DuplicateEdgeError,
    IndexOutOfRangeError,
    MalformedLineError,
    MissingDatasetFileError,
)
from gattrim.graph import make_graph
from gattrim.synth import generate_synthetic


def write_dataset(root, meta=None, nodes=None, edges=None):
    root.mkdir(parents=True, exist_ok=True)
    if meta is not None:
        (root / "meta").write_text(meta, encoding="utf-8")
    if nodes is not None:
        (root / "nodes.tsv").write_text(nodes, encoding="utf-8")
    if edges is not None:
        (root / "edges.tsv").write_text(edges, encoding="utf-8")


META3 = "num_nodes=3\nnum_classes=2\nfeature_dim=2\nundirected=1\n"
NODES3 = "0\t0\t1.0,0.0\n1\t1\t0.0,1.0\n2\t-\t0.5,0.5\n"


def test_load_small_graph(tmp_path):
    write_dataset(tmp_path, META3, NODES3, "0\t1\n1\t2\n")
    g = load_graph(tmp_path)
    assert g.num_nodes == 3
    assert g.num_classes == 2
    assert g.feature_dim == 2
    assert g.undirected
    assert g.num_edges == 2
    assert g.num_records == 4  # symmetrized
    assert g.labels.tolist() == [0, 1, -1]
    np.testing.assert_allclose(g.features[2], [0.5, 0.5])


def test_load_empty_edges(tmp_path):
    write_dataset(tmp_path, META3, NODES3, "")
    g = load_graph(tmp_path)
    assert g.num_nodes == 3 and g.num_edges == 0


def test_missing_files(tmp_path):
    with pytest.raises(MissingDatasetFileError):
        load_graph(tmp_path / "nope")
    write_dataset(tmp_path, META3, NODES3, None)
    with pytest.raises(MissingDatasetFileError):
        load_graph(tmp_path)


def test_meta_malformed(tmp_path):
    write_dataset(tmp_path, "num_nodes 3\n", NODES3, "")
    with pytest.raises(MalformedLineError):
        load_graph(tmp_path)
    write_dataset(tmp_path, "num_nodes=3\nnum_classes=2\nfeature_dim=2\n", NODES3, "")
    with pytest.raises(MalformedLineError):
        load_graph(tmp_path)
    write_dataset(tmp_path, META3 + "bogus=1\n", NODES3, "")
    with pytest.raises(MalformedLineError):
        load_graph(tmp_path)


def test_node_label_out_of_range(tmp_path):
    bad = NODES3.replace("1\t1\t", "1\t7\t")
    write_dataset(tmp_path, META3, bad, "")
    with pytest.raises(IndexOutOfRangeError) as e:
        load_graph(tmp_path)
    assert e.value.line_no == 2


def test_node_feature_count_mismatch(tmp_path):
    bad = NODES3.replace("0.0,1.0", "0.0")
    write_dataset(tmp_path, META3, bad, "")
    with pytest.raises(MalformedLineError):
        load_graph(tmp_path)


def test_node_id_duplicate(tmp_path):
    bad = NODES3.replace("2\t-\t", "0\t-\t")
    write_dataset(tmp_path, META3, bad, "")
    with pytest.raises(MalformedLineError):
        load_graph(tmp_path)


def test_edge_endpoint_out_of_range(tmp_path):
    write_dataset(tmp_path, META3, NODES3, "0\t9\n")
    with pytest.raises(IndexOutOfRangeError) as e:
        load_graph(tmp_path)
    assert e.value.line_no == 1


def test_edge_duplicate_exact(tmp_path):
    write_dataset(tmp_path, META3, NODES3, "0\t1\n0\t1\n")
    with pytest.raises(DuplicateEdgeError) as e:
        load_graph(tmp_path)
    assert e.value.line_no == 2


def test_edge_duplicate_reverse_when_undirected(tmp_path):
    write_dataset(tmp_path, META3, NODES3, "0\t1\n1\t0\n")
    with pytest.raises(DuplicateEdgeError):
        load_graph(tmp_path)


def test_edge_reverse_ok_when_directed(tmp_path):
    write_dataset(tmp_path, META3.replace("undirected=1", "undirected=0"),
                  NODES3, "0\t1\n1\t0\n")
    g = load_graph(tmp_path)
    assert not g.undirected
    assert g.num_edges == 2


def test_edge_malformed_line(tmp_path):
    write_dataset(tmp_path, META3, NODES3, "0 1\n")
    with pytest.raises(MalformedLineError):
        load_graph(tmp_path)


def test_self_loop_allowed_once(tmp_path):
    write_dataset(tmp_path, META3, NODES3, "1\t1\n")
    g = load_graph(tmp_path)
    assert g.num_self_loops == 1
    assert g.num_edges == 1


def test_round_trip_undirected(tmp_path):
    g = generate_synthetic(40, 3, 5, 0.3, 4.0, 2.0, seed=1)
    save_graph(g, tmp_path / "out")
    again = load_graph(tmp_path / "out")
    assert again == g


def test_round_trip_directed_with_unknown_labels(tmp_path):
    feats = np.random.default_rng(0).normal(size=(4, 3))
    g = make_graph(4, 2, [0, 1, 2, 2], [1, 2, 0, 2], feats, [0, 1, -1, 0],
                   undirected=False)
    save_graph(g, tmp_path / "out")
    again = load_graph(tmp_path / "out")
    assert again == g
