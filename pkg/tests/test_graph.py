"""Dataset format, adjacency operators, and split sampling."""

import json
import struct

import numpy as np
import pytest

from goe.graph import (
    DatasetManifest,
    TextAttributedGraph,
    canonicalize_edges,
    compute_id_ratio,
    load_dataset,
    load_split,
    make_class_split,
    normalize_adjacency,
    row_stochastic_adjacency,
    sample_data_split,
    save_dataset,
    save_split,
)


def _write_dataset(directory, texts, labels, edges, embeddings, dim=None):
    n = len(texts)
    dim = embeddings.shape[1] if dim is None else dim
    (directory / "manifest.json").write_text(json.dumps({
        "name": "tiny", "object_kind": "paper",
        "category_names": [f"c{i}" for i in range(int(max(labels)) + 1)],
        "embedding_dim": dim, "node_count": n,
    }))
    with (directory / "nodes.jsonl").open("w") as fh:
        for i in range(n):
            fh.write(json.dumps({"id": i, "text": texts[i], "label": int(labels[i])}) + "\n")
    (directory / "edges.tsv").write_text(
        "".join(f"{i}\t{j}\n" for i, j in edges))
    with (directory / "embeddings.bin").open("wb") as fh:
        fh.write(struct.pack("<II", embeddings.shape[0], embeddings.shape[1]))
        fh.write(embeddings.astype("<f4").tobytes())


def test_load_three_node_dataset(tmp_path):
    emb = np.arange(6, dtype=np.float32).reshape(3, 2)
    _write_dataset(tmp_path, ["a", "b", "c"], [0, 1, 0], [(0, 1)], emb)
    graph, manifest = load_dataset(tmp_path)
    assert graph.node_count == 3
    assert graph.edges.tolist() == [[0, 1]]
    assert manifest.embedding_dim == 2
    assert np.array_equal(graph.embeddings, emb)


def test_load_dedups_reversed_edges(tmp_path):
    emb = np.zeros((2, 2), dtype=np.float32)
    _write_dataset(tmp_path, ["a", "b"], [0, 1], [(0, 1), (1, 0)], emb)
    graph, _ = load_dataset(tmp_path)
    assert graph.edges.tolist() == [[0, 1]]


def test_load_row_count_mismatch(tmp_path):
    emb = np.zeros((2, 2), dtype=np.float32)  # 2 rows for 3 nodes
    _write_dataset(tmp_path, ["a", "b", "c"], [0, 1, 0], [(0, 1)], emb)
    with pytest.raises(ValueError, match="row-count mismatch"):
        load_dataset(tmp_path)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path)


def test_load_edge_out_of_range(tmp_path):
    emb = np.zeros((2, 2), dtype=np.float32)
    _write_dataset(tmp_path, ["a", "b"], [0, 1], [(0, 5)], emb)
    with pytest.raises(ValueError, match="out of range"):
        load_dataset(tmp_path)


def test_load_non_finite_embedding(tmp_path):
    emb = np.zeros((2, 2), dtype=np.float32)
    emb[1, 1] = np.nan
    _write_dataset(tmp_path, ["a", "b"], [0, 1], [(0, 1)], emb)
    with pytest.raises(ValueError, match="non-finite"):
        load_dataset(tmp_path)


def test_dataset_roundtrip_identical(planted, tmp_path):
    graph, manifest = planted
    save_dataset(graph, manifest, tmp_path)
    loaded, loaded_manifest = load_dataset(tmp_path)
    assert loaded.texts == graph.texts
    assert np.array_equal(loaded.labels, graph.labels)
    assert np.array_equal(loaded.edges, graph.edges)
    assert np.array_equal(loaded.embeddings, graph.embeddings)
    assert loaded_manifest == manifest


def test_canonicalize_rejects_self_loop():
    with pytest.raises(ValueError, match="self-loop"):
        canonicalize_edges(np.array([[1, 1]]), 3)


def _graph_from_edges(n, edges, dim=2):
    return TextAttributedGraph(
        node_count=n,
        edges=canonicalize_edges(np.array(edges, dtype=np.int64).reshape(-1, 2), n),
        texts=["t"] * n,
        embeddings=np.zeros((n, dim), dtype=np.float32),
        labels=np.zeros(n, dtype=np.int64),
    )


class TestNormalizeAdjacency:
    def test_isolated_node(self):
        a = normalize_adjacency(_graph_from_edges(1, [])).toarray()
        assert a.tolist() == [[1.0]]

    def test_two_node_edge(self):
        # degrees with self-loops: (2, 2), so every entry is 1/sqrt(2*2)
        a = normalize_adjacency(_graph_from_edges(2, [(0, 1)])).toarray()
        np.testing.assert_allclose(a, 0.5)

    def test_path_graph_entry(self):
        a = normalize_adjacency(_graph_from_edges(3, [(0, 1), (1, 2)])).toarray()
        assert a[0, 1] == pytest.approx(1.0 / np.sqrt(2 * 3), abs=1e-12)

    def test_bitwise_symmetry(self):
        rng = np.random.default_rng(3)
        n = 40
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.1]
        a = normalize_adjacency(_graph_from_edges(n, edges)).toarray()
        assert np.array_equal(a, a.T)
        assert np.all(np.diag(a) > 0)
        assert np.all(a.sum(axis=1) > 0)

    def test_regular_graph_rows_sum_to_one(self):
        # 6-cycle: every node is 2-regular, so each entry is 1/3
        n = 6
        ring = [(i, (i + 1) % n) for i in range(n)]
        a = normalize_adjacency(_graph_from_edges(n, ring))
        rows = np.asarray(a.sum(axis=1)).ravel()
        np.testing.assert_allclose(rows, 1.0, atol=1e-12)

    def test_row_stochastic_rows_sum_to_one(self):
        g = _graph_from_edges(5, [(0, 1), (1, 2), (0, 4)])
        p = row_stochastic_adjacency(g)
        np.testing.assert_allclose(np.asarray(p.sum(axis=1)).ravel(), 1.0, atol=1e-15)


class TestClassSplit:
    def test_counts(self):
        labels = np.array([0, 1, 2, 3, 4, 5, 6] * 3)
        cs = make_class_split(labels, [2, 4, 5, 6])
        assert cs.num_id_classes == 4
        assert cs.num_ood_classes == 3
        assert cs.compact_index == {2: 0, 4: 1, 5: 2, 6: 3}

    def test_two_class_split(self):
        labels = np.array([0, 1, 2] * 4)
        cs = make_class_split(labels, [0, 1])
        assert cs.num_id_classes == 2
        assert cs.ood_classes == [2]

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            make_class_split(np.array([0, 1]), [0])

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="unknown label"):
            make_class_split(np.array([0, 1]), [0, 7])

    def test_sentinel_not_an_ood_class(self):
        labels = np.array([0, 1, 2, -1, -1])
        cs = make_class_split(labels, [0, 1])
        assert cs.ood_classes == [2]

    def test_compact_labels(self):
        labels = np.array([5, 2, 9, 2])
        cs = make_class_split(labels, [2, 5])
        assert cs.compact_labels(labels).tolist() == [1, 0, -1, 0]


def test_id_ratio_all_id():
    labels = np.array([0, 1, 0, 1])
    cs = make_class_split(labels, [0, 1])
    assert compute_id_ratio(labels, cs) == 1.0


def test_id_ratio_fraction(planted):
    graph, _ = planted
    cs = make_class_split(graph.labels, [0, 1])
    assert compute_id_ratio(graph.labels, cs) == pytest.approx(2 / 3, abs=1e-12)


def _big_synthetic_graph(seed=0, n_id=3000, n_ood=1500):
    rng = np.random.default_rng(seed)
    labels = np.concatenate([
        rng.integers(0, 2, size=n_id),       # ID classes 0, 1
        np.full(n_ood, 2, dtype=np.int64),   # OOD class 2
    ]).astype(np.int64)
    n = labels.size
    return TextAttributedGraph(
        node_count=n, edges=np.zeros((0, 2), dtype=np.int64),
        texts=["t"] * n,
        embeddings=np.zeros((n, 2), dtype=np.float32), labels=labels,
    )


class TestSampleDataSplit:
    def test_paper_protocol_sizes(self):
        graph = _big_synthetic_graph()
        cs = make_class_split(graph.labels, [0, 1])
        split = sample_data_split(graph, cs, seed=0)
        sizes = {k: len(v) for k, v in split.all_sets().items()}
        assert sizes == {"train_id": 40, "val_id": 20, "val_ood": 20,
                         "test_id": 500, "test_ood": 500}

    def test_disjoint_and_label_respecting(self):
        graph = _big_synthetic_graph()
        cs = make_class_split(graph.labels, [0, 1])
        split = sample_data_split(graph, cs, seed=1)
        union = split.evaluation_nodes()
        assert len(np.unique(union)) == 40 + 20 + 20 + 1000
        for name in ("train_id", "val_id", "test_id"):
            assert np.all(np.isin(graph.labels[split.all_sets()[name]], [0, 1]))
        for name in ("val_ood", "test_ood"):
            assert np.all(graph.labels[split.all_sets()[name]] == 2)

    def test_same_seed_identical(self):
        graph = _big_synthetic_graph()
        cs = make_class_split(graph.labels, [0, 1])
        a = sample_data_split(graph, cs, seed=7)
        b = sample_data_split(graph, cs, seed=7)
        for name in a.all_sets():
            assert np.array_equal(a.all_sets()[name], b.all_sets()[name])

    def test_test_size_does_not_perturb_train(self):
        graph = _big_synthetic_graph()
        cs = make_class_split(graph.labels, [0, 1])
        a = sample_data_split(graph, cs, seed=3, test_id_size=500, test_ood_size=500)
        b = sample_data_split(graph, cs, seed=3, test_id_size=100, test_ood_size=100)
        assert np.array_equal(a.train_id, b.train_id)
        assert np.array_equal(a.val_id, b.val_id)

    def test_insufficient_id_nodes(self):
        graph = _big_synthetic_graph(n_id=30, n_ood=1500)
        cs = make_class_split(graph.labels, [0, 1])
        with pytest.raises(ValueError, match="insufficient ID nodes"):
            sample_data_split(graph, cs, seed=0)

    def test_insufficient_ood_nodes(self):
        graph = _big_synthetic_graph(n_id=3000, n_ood=50)
        cs = make_class_split(graph.labels, [0, 1])
        with pytest.raises(ValueError, match="insufficient OOD nodes"):
            sample_data_split(graph, cs, seed=0)


def test_split_json_roundtrip(tmp_path):
    graph = _big_synthetic_graph()
    cs = make_class_split(graph.labels, [0, 1])
    split = sample_data_split(graph, cs, seed=5)
    path = tmp_path / "split.json"
    save_split(split, path, id_classes=[0, 1])
    loaded, id_classes = load_split(path)
    assert id_classes == [0, 1]
    assert loaded.seed == 5
    for name in split.all_sets():
        assert np.array_equal(loaded.all_sets()[name], split.all_sets()[name])


def test_manifest_validation():
    with pytest.raises(ValueError):
        DatasetManifest(name="x", object_kind="paper", category_names=[],
                        embedding_dim=4, node_count=1).validate()
