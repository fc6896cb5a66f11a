"""Plain-text dataset directories: bit-exact load and save.

Layout (UTF-8, LF, TAB-separated):

  meta        key=value lines: num_nodes, num_classes, feature_dim, undirected
  nodes.tsv   node_id TAB label TAB comma-separated features ("-" = unknown)
  edges.tsv   src TAB dst, one record per line; undirected graphs store each
              proper edge once (either direction) and are symmetrized on load

Self-loops are legal records and stored once.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import (
    DuplicateEdgeError,
    IndexOutOfRangeError,
    MalformedLineError,
    MissingDatasetFileError,
)
from .graph import UNKNOWN_LABEL, Graph, make_graph

_META_KEYS = ("num_nodes", "num_classes", "feature_dim", "undirected")


def _read_lines(path: Path) -> list:
    if not path.is_file():
        raise MissingDatasetFileError(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_meta(path: Path) -> dict:
    meta = {}
    for line_no, line in enumerate(_read_lines(path), start=1):
        if "=" not in line:
            raise MalformedLineError(path, line_no, "expected key=value")
        key, _, value = line.partition("=")
        if key not in _META_KEYS:
            raise MalformedLineError(path, line_no, f"unknown key {key!r}")
        if key in meta:
            raise MalformedLineError(path, line_no, f"duplicate key {key!r}")
        try:
            meta[key] = int(value)
        except ValueError:
            raise MalformedLineError(path, line_no, f"{key} must be an integer")
    for key in _META_KEYS:
        if key not in meta:
            raise MalformedLineError(path, 0, f"missing key {key!r}")
    if meta["undirected"] not in (0, 1):
        raise MalformedLineError(path, 0, "undirected must be 0 or 1")
    if meta["num_nodes"] < 0 or meta["num_classes"] < 1 or meta["feature_dim"] < 0:
        raise MalformedLineError(path, 0, "counts out of range")
    return meta


def load_graph(dir_path) -> Graph:
    """Read a dataset directory into a validated Graph.

    Distinct failures: missing file, malformed line, index out of range,
    duplicate edge — each its own exception type carrying file and line.
    """
    root = Path(dir_path)
    meta = _parse_meta(root / "meta")
    n, c, f = meta["num_nodes"], meta["num_classes"], meta["feature_dim"]
    undirected = bool(meta["undirected"])

    nodes_path = root / "nodes.tsv"
    labels = np.full(n, UNKNOWN_LABEL, dtype=np.int64)
    features = np.zeros((n, f), dtype=np.float64)
    seen = np.zeros(n, dtype=bool)
    lines = _read_lines(nodes_path)
    if len(lines) != n:
        raise MalformedLineError(nodes_path, len(lines),
                                 f"expected {n} node lines, found {len(lines)}")
    for line_no, line in enumerate(lines, start=1):
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedLineError(nodes_path, line_no,
                                     f"expected 3 tab-separated fields, got {len(parts)}")
        try:
            node_id = int(parts[0])
        except ValueError:
            raise MalformedLineError(nodes_path, line_no, "node id must be an integer")
        if not 0 <= node_id < n:
            raise IndexOutOfRangeError(nodes_path, line_no,
                                       f"node id {node_id} outside [0, {n})")
        if seen[node_id]:
            raise MalformedLineError(nodes_path, line_no,
                                     f"node id {node_id} repeated")
        seen[node_id] = True
        if parts[1] != "-":
            try:
                label = int(parts[1])
            except ValueError:
                raise MalformedLineError(nodes_path, line_no,
                                         "label must be an integer or '-'")
            if not 0 <= label < c:
                raise IndexOutOfRangeError(nodes_path, line_no,
                                           f"label {label} outside [0, {c})")
            labels[node_id] = label
        raw = parts[2].split(",") if parts[2] else []
        if len(raw) != f:
            raise MalformedLineError(nodes_path, line_no,
                                     f"expected {f} features, got {len(raw)}")
        try:
            row = np.array([float(x) for x in raw], dtype=np.float64)
        except ValueError:
            raise MalformedLineError(nodes_path, line_no, "unparseable feature value")
        if f and not np.all(np.isfinite(row)):
            raise MalformedLineError(nodes_path, line_no, "non-finite feature value")
        features[node_id] = row

    edges_path = root / "edges.tsv"
    src_list, dst_list = [], []
    taken = {}
    for line_no, line in enumerate(_read_lines(edges_path), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise MalformedLineError(edges_path, line_no,
                                     f"expected 2 tab-separated fields, got {len(parts)}")
        try:
            s, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedLineError(edges_path, line_no, "endpoints must be integers")
        if not (0 <= s < n and 0 <= d < n):
            raise IndexOutOfRangeError(edges_path, line_no,
                                       f"endpoint outside [0, {n})")
        key = (min(s, d), max(s, d)) if undirected else (s, d)
        if key in taken:
            raise DuplicateEdgeError(edges_path, line_no,
                                     f"edge ({s}, {d}) already given on line {taken[key]}")
        taken[key] = line_no
        src_list.append(s)
        dst_list.append(d)

    return make_graph(n, c, np.array(src_list, dtype=np.int64),
                      np.array(dst_list, dtype=np.int64), features, labels,
                      undirected=undirected, symmetrize=undirected)


def save_graph(g: Graph, dir_path) -> None:
    """Write g in the directory format load_graph reads.

    Undirected graphs store each proper edge once as (min, max); feature
    values use shortest round-trip decimal text.
    """
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "meta").write_text(
        f"num_nodes={g.num_nodes}\nnum_classes={g.num_classes}\n"
        f"feature_dim={g.feature_dim}\nundirected={int(g.undirected)}\n",
        encoding="utf-8")

    with open(root / "nodes.tsv", "w", encoding="utf-8") as fh:
        for v in range(g.num_nodes):
            label = "-" if g.labels[v] == UNKNOWN_LABEL else str(int(g.labels[v]))
            feats = ",".join(repr(float(x)) for x in g.features[v])
            fh.write(f"{v}\t{label}\t{feats}\n")

    with open(root / "edges.tsv", "w", encoding="utf-8") as fh:
        if g.undirected:
            for s, d in zip(g.src.tolist(), g.dst.tolist()):
                if s <= d:
                    fh.write(f"{s}\t{d}\n")
        else:
            for s, d in zip(g.src.tolist(), g.dst.tolist()):
                fh.write(f"{s}\t{d}\n")


_BUNDLED = ("cornell", "texas", "wisconsin")


def bundled_dataset_path(name: str) -> Path:
    """Directory of a dataset shipped inside the package."""
    path = Path(__file__).resolve().parent / "datasets" / name.lower()
    if name.lower() not in _BUNDLED or not path.is_dir():
        raise MissingDatasetFileError(path)
    return path


def load_bundled(name: str) -> Graph:
    return load_graph(bundled_dataset_path(name))
