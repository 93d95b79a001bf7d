"""Text-attributed graph data model, on-disk dataset format, and node splits.

A dataset directory holds four files:

    manifest.json    {name, object_kind, category_names[], embedding_dim, node_count}
    nodes.jsonl      one object per line: {"id": int, "text": str, "label": int}
    edges.tsv        two whitespace-separated integer columns per line
    embeddings.bin   8-byte header (u32 rows, u32 cols, little-endian) followed by
                     rows*cols IEEE-754 float32 values, row-major

Node splits travel as split.json with the node-id sets for training,
validation and test.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

LABEL_UNAVAILABLE = -1

# Independent seed streams so resizing one split set never perturbs the others.
_STREAM_TRAIN = 0
_STREAM_VAL_ID = 1
_STREAM_VAL_OOD = 2
_STREAM_TEST_ID = 3
_STREAM_TEST_OOD = 4
STREAM_ANNOTATION_POOL = 5
STREAM_HEAD_BALANCE = 6
STREAM_PSEUDO_VAL = 7


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Named RNG stream derived from a base seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


@dataclass
class TextAttributedGraph:
    """Undirected graph whose nodes carry free text and an embedding row.

    Edges are canonical (i < j) and deduplicated. Labels use
    ``LABEL_UNAVAILABLE`` (-1) when a node has no known class.
    """

    node_count: int
    edges: np.ndarray        # (E, 2) int64, canonical i < j
    texts: list[str]
    embeddings: np.ndarray   # (n, d) float32
    labels: np.ndarray       # (n,) int64

    @property
    def embedding_dim(self) -> int:
        return int(self.embeddings.shape[1])

    def validate(self) -> None:
        n = self.node_count
        if len(self.texts) != n:
            raise ValueError(f"row-count mismatch: {len(self.texts)} texts for {n} nodes")
        if self.embeddings.shape[0] != n:
            raise ValueError(
                f"row-count mismatch: {self.embeddings.shape[0]} embedding rows for {n} nodes"
            )
        if self.labels.shape[0] != n:
            raise ValueError(f"row-count mismatch: {self.labels.shape[0]} labels for {n} nodes")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError("non-finite embedding entry")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= n:
                raise ValueError("edge index out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-loop in edge list")
            if np.any(self.edges[:, 0] > self.edges[:, 1]):
                raise ValueError("edge list not canonical (expected i < j)")
            if len(np.unique(self.edges, axis=0)) != len(self.edges):
                raise ValueError("duplicate undirected edge")


@dataclass
class DatasetManifest:
    name: str
    object_kind: str
    category_names: list[str]
    embedding_dim: int
    node_count: int

    def validate(self) -> None:
        if self.embedding_dim <= 0:
            raise ValueError("embedding_dim must be positive")
        if not self.category_names:
            raise ValueError("category_names must be non-empty")


@dataclass
class ClassSplit:
    """Partition of original label values into ID classes and OOD classes."""

    id_classes: list[int]
    ood_classes: list[int]
    compact_index: dict[int, int] = field(init=False)

    def __post_init__(self) -> None:
        self.compact_index = {c: i for i, c in enumerate(self.id_classes)}

    @property
    def num_id_classes(self) -> int:
        return len(self.id_classes)

    @property
    def num_ood_classes(self) -> int:
        return len(self.ood_classes)

    def compact_labels(self, labels: np.ndarray) -> np.ndarray:
        """Map original labels to [0, K) for ID classes, -1 for everything else."""
        out = np.full(labels.shape, -1, dtype=np.int64)
        for original, idx in self.compact_index.items():
            out[labels == original] = idx
        return out

    def is_ood_label(self, labels: np.ndarray) -> np.ndarray:
        return np.isin(labels, self.ood_classes)


@dataclass
class DataSplit:
    """Disjoint labeled/validation/test node-id sets (stored sorted)."""

    train_id: np.ndarray
    val_id: np.ndarray
    val_ood: np.ndarray
    test_id: np.ndarray
    test_ood: np.ndarray
    seed: int

    def all_sets(self) -> dict[str, np.ndarray]:
        return {
            "train_id": self.train_id,
            "val_id": self.val_id,
            "val_ood": self.val_ood,
            "test_id": self.test_id,
            "test_ood": self.test_ood,
        }

    def evaluation_nodes(self) -> np.ndarray:
        return np.concatenate(list(self.all_sets().values()))

    def validate(self, labels: np.ndarray, class_split: ClassSplit) -> None:
        sets = self.all_sets()
        union = np.concatenate(list(sets.values()))
        if len(np.unique(union)) != len(union):
            raise ValueError("split sets are not pairwise disjoint")
        for name in ("train_id", "val_id", "test_id"):
            if not np.all(np.isin(labels[sets[name]], class_split.id_classes)):
                raise ValueError(f"{name} contains a node whose label is not an ID class")
        for name in ("val_ood", "test_ood"):
            if not np.all(np.isin(labels[sets[name]], class_split.ood_classes)):
                raise ValueError(f"{name} contains a node whose label is not an OOD class")


def canonicalize_edges(pairs: np.ndarray, node_count: int) -> np.ndarray:
    """Orient every pair as (min, max) and drop duplicates."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if pairs.min() < 0 or pairs.max() >= node_count:
        raise ValueError("edge index out of range")
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise ValueError("self-loop in edge list")
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    canon = np.stack([lo, hi], axis=1)
    return np.unique(canon, axis=0)


# ---------------------------------------------------------------------------
# Dataset directory IO
# ---------------------------------------------------------------------------

def _read_embeddings_bin(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path.name}: truncated header")
    rows, cols = struct.unpack("<II", raw[:8])
    expected = 8 + rows * cols * 4
    if len(raw) != expected:
        raise ValueError(f"{path.name}: expected {expected} bytes, found {len(raw)}")
    mat = np.frombuffer(raw, dtype="<f4", offset=8).reshape(rows, cols)
    return np.ascontiguousarray(mat)


def _write_embeddings_bin(path: Path, mat: np.ndarray) -> None:
    rows, cols = mat.shape
    with path.open("wb") as fh:
        fh.write(struct.pack("<II", rows, cols))
        fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def load_manifest(directory: Path | str) -> DatasetManifest:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    data = json.loads(path.read_text())
    manifest = DatasetManifest(
        name=data["name"],
        object_kind=data["object_kind"],
        category_names=list(data["category_names"]),
        embedding_dim=int(data["embedding_dim"]),
        node_count=int(data["node_count"]),
    )
    manifest.validate()
    return manifest


def load_dataset(directory: Path | str) -> tuple[TextAttributedGraph, DatasetManifest]:
    """Read a dataset directory and return a validated graph plus its manifest."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    for name in ("nodes.jsonl", "edges.tsv", "embeddings.bin"):
        if not (directory / name).exists():
            raise FileNotFoundError(f"missing file: {directory / name}")

    records = {}
    with (directory / "nodes.jsonl").open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            node_id = int(obj["id"])
            if node_id in records:
                raise ValueError(f"duplicate node id {node_id}")
            records[node_id] = (str(obj["text"]), int(obj["label"]))
    n = len(records)
    if sorted(records) != list(range(n)):
        raise ValueError("node ids must be exactly 0..n-1")

    texts = [records[i][0] for i in range(n)]
    labels = np.array([records[i][1] for i in range(n)], dtype=np.int64)
    num_classes = len(manifest.category_names)
    bad = (labels != LABEL_UNAVAILABLE) & ((labels < 0) | (labels >= num_classes))
    if np.any(bad):
        raise ValueError("label out of range for manifest category_names")

    pairs = []
    with (directory / "edges.tsv").open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"malformed edge line: {line!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    edges = canonicalize_edges(np.array(pairs, dtype=np.int64).reshape(-1, 2), n)

    embeddings = _read_embeddings_bin(directory / "embeddings.bin")
    if embeddings.shape[0] != n:
        raise ValueError(
            f"row-count mismatch: {embeddings.shape[0]} embedding rows for {n} nodes"
        )
    if embeddings.shape[1] != manifest.embedding_dim:
        raise ValueError("embedding_dim in manifest does not match embeddings.bin")
    if manifest.node_count != n:
        raise ValueError("node_count in manifest does not match nodes.jsonl")

    graph = TextAttributedGraph(
        node_count=n, edges=edges, texts=texts, embeddings=embeddings, labels=labels
    )
    graph.validate()
    return graph, manifest


def save_dataset(graph: TextAttributedGraph, manifest: DatasetManifest,
                 directory: Path | str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    graph.validate()
    manifest.validate()
    (directory / "manifest.json").write_text(json.dumps({
        "name": manifest.name,
        "object_kind": manifest.object_kind,
        "category_names": manifest.category_names,
        "embedding_dim": manifest.embedding_dim,
        "node_count": manifest.node_count,
    }, indent=2) + "\n")
    with (directory / "nodes.jsonl").open("w") as fh:
        for i in range(graph.node_count):
            fh.write(json.dumps({
                "id": i, "text": graph.texts[i], "label": int(graph.labels[i]),
            }) + "\n")
    with (directory / "edges.tsv").open("w") as fh:
        for i, j in graph.edges:
            fh.write(f"{i}\t{j}\n")
    _write_embeddings_bin(directory / "embeddings.bin", graph.embeddings)


# ---------------------------------------------------------------------------
# Adjacency operators
# ---------------------------------------------------------------------------

def _degrees_with_self_loops(graph: TextAttributedGraph) -> np.ndarray:
    deg = np.ones(graph.node_count, dtype=np.float64)
    if graph.edges.size:
        np.add.at(deg, graph.edges[:, 0], 1.0)
        np.add.at(deg, graph.edges[:, 1], 1.0)
    return deg


def normalize_adjacency(graph: TextAttributedGraph) -> sp.csr_matrix:
    """Symmetric degree-normalized adjacency with self-loops.

    Entry (i, j) is 1/sqrt(deg_i * deg_j) for connected pairs and along the
    diagonal, where degrees count the self-loop. Exactly symmetric because
    each off-diagonal pair is computed as the same commutative product.
    """
    n = graph.node_count
    deg_inv_sqrt = 1.0 / np.sqrt(_degrees_with_self_loops(graph))
    src = graph.edges[:, 0] if graph.edges.size else np.zeros(0, dtype=np.int64)
    dst = graph.edges[:, 1] if graph.edges.size else np.zeros(0, dtype=np.int64)
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([src, dst, diag])
    cols = np.concatenate([dst, src, diag])
    vals = deg_inv_sqrt[rows] * deg_inv_sqrt[cols]
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def row_stochastic_adjacency(graph: TextAttributedGraph) -> sp.csr_matrix:
    """Row-normalized adjacency with self-loops; every row sums to 1."""
    n = graph.node_count
    deg_inv = 1.0 / _degrees_with_self_loops(graph)
    src = graph.edges[:, 0] if graph.edges.size else np.zeros(0, dtype=np.int64)
    dst = graph.edges[:, 1] if graph.edges.size else np.zeros(0, dtype=np.int64)
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([src, dst, diag])
    cols = np.concatenate([dst, src, diag])
    vals = deg_inv[rows]
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


# ---------------------------------------------------------------------------
# Class and node splits
# ---------------------------------------------------------------------------

def make_class_split(labels: np.ndarray, id_class_list: list[int]) -> ClassSplit:
    """Declare which original label values count as in-distribution.

    The remaining observed label values (excluding the -1 sentinel) become
    the OOD classes. At least two ID classes are required so the ID
    classification task is well posed.
    """
    if len(id_class_list) < 2:
        raise ValueError("at least 2 ID classes are required")
    if len(set(id_class_list)) != len(id_class_list):
        raise ValueError("duplicate values in id_class_list")
    present = set(int(v) for v in np.unique(labels) if v != LABEL_UNAVAILABLE)
    for value in id_class_list:
        if value not in present:
            raise ValueError(f"unknown label value {value}")
    ood = sorted(present - set(id_class_list))
    return ClassSplit(id_classes=[int(v) for v in id_class_list], ood_classes=ood)


def compute_id_ratio(labels: np.ndarray, class_split: ClassSplit) -> float:
    """Fraction of all nodes whose label is one of the ID classes."""
    return float(np.isin(labels, class_split.id_classes).mean())


def sample_data_split(
    graph: TextAttributedGraph,
    class_split: ClassSplit,
    seed: int,
    *,
    train_per_class: int = 20,
    val_per_class: int = 10,
    test_id_size: int = 500,
    test_ood_size: int = 500,
) -> DataSplit:
    """Sample disjoint train/val/test node sets without replacement.

    Training and ID validation are balanced per ID class; OOD validation and
    both test sets are drawn from the relevant pools at large. Each set uses
    its own seed stream, so changing the test sizes leaves the training draw
    untouched.
    """
    labels = graph.labels
    k = class_split.num_id_classes

    rng_train = stream_rng(seed, _STREAM_TRAIN)
    rng_val_id = stream_rng(seed, _STREAM_VAL_ID)
    rng_val_ood = stream_rng(seed, _STREAM_VAL_OOD)
    rng_test_id = stream_rng(seed, _STREAM_TEST_ID)
    rng_test_ood = stream_rng(seed, _STREAM_TEST_OOD)

    train_parts, val_parts = [], []
    for cls in class_split.id_classes:
        pool = np.flatnonzero(labels == cls)
        if len(pool) < train_per_class + val_per_class:
            raise ValueError(f"insufficient ID nodes in class {cls}")
        picked = rng_train.choice(pool, size=train_per_class, replace=False)
        train_parts.append(picked)
        remaining = np.setdiff1d(pool, picked)
        val_parts.append(rng_val_id.choice(remaining, size=val_per_class, replace=False))
    train_id = np.sort(np.concatenate(train_parts))
    val_id = np.sort(np.concatenate(val_parts))

    id_pool = np.flatnonzero(np.isin(labels, class_split.id_classes))
    id_remaining = np.setdiff1d(id_pool, np.concatenate([train_id, val_id]))
    if len(id_remaining) < test_id_size:
        raise ValueError("insufficient ID nodes")
    test_id = np.sort(rng_test_id.choice(id_remaining, size=test_id_size, replace=False))

    ood_pool = np.flatnonzero(np.isin(labels, class_split.ood_classes))
    if len(ood_pool) < val_per_class * k + test_ood_size:
        raise ValueError("insufficient OOD nodes")
    val_ood = np.sort(rng_val_ood.choice(ood_pool, size=val_per_class * k, replace=False))
    ood_remaining = np.setdiff1d(ood_pool, val_ood)
    test_ood = np.sort(rng_test_ood.choice(ood_remaining, size=test_ood_size, replace=False))

    split = DataSplit(
        train_id=train_id, val_id=val_id, val_ood=val_ood,
        test_id=test_id, test_ood=test_ood, seed=seed,
    )
    split.validate(labels, class_split)
    return split


def save_split(split: DataSplit, path: Path | str,
               id_classes: list[int] | None = None) -> None:
    payload: dict = {"seed": split.seed}
    for name, ids in split.all_sets().items():
        payload[name] = [int(v) for v in ids]
    if id_classes is not None:
        payload["id_classes"] = [int(v) for v in id_classes]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_split(path: Path | str) -> tuple[DataSplit, list[int] | None]:
    data = json.loads(Path(path).read_text())
    split = DataSplit(
        train_id=np.array(sorted(data["train_id"]), dtype=np.int64),
        val_id=np.array(sorted(data["val_id"]), dtype=np.int64),
        val_ood=np.array(sorted(data["val_ood"]), dtype=np.int64),
        test_id=np.array(sorted(data["test_id"]), dtype=np.int64),
        test_ood=np.array(sorted(data["test_ood"]), dtype=np.int64),
        seed=int(data["seed"]),
    )
    id_classes = [int(v) for v in data["id_classes"]] if "id_classes" in data else None
    return split, id_classes
