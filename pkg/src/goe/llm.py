"""LLM-driven pseudo-OOD supervision for text-attributed graphs.

Two pipelines produce pseudo-OOD training signal without real OOD labels:

* identification — sample unlabeled nodes, ask a chat model whether each one
  fits any in-distribution category, and keep the nodes it rejects;
* generation — ask the chat model to write new out-of-category texts, embed
  them, and append them to the graph as synthetic nodes.

Chat traffic flows through an append-only jsonl cache keyed by
hash(model, prompt), so every pipeline can be replayed offline and
byte-for-byte deterministically.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import requests

from .graph import STREAM_ANNOTATION_POOL, TextAttributedGraph, stream_rng

DEFAULT_MODEL = "gpt-4o-mini"
IDENTIFY_TEMPERATURE = 0.0
IDENTIFY_MAX_TOKENS = 512
GENERATE_TEMPERATURE = 1.0
GENERATE_MAX_TOKENS = 2048

PARSED_ID = "id"
PARSED_OOD = "ood"
PARSED_UNPARSEABLE = "unparseable"

_IDENTIFICATION_TEMPLATE = (
    "As a research scientist, your task is to analyze and classify {object} based on "
    "their main topics, meanings, background, and methods.\n\n"
    "Please first read the content of the {object} carefully. Then, identify the "
    "{object}'s key focus. Finally, match the content to one of the given categories:\n\n"
    "[{categories}]\n\n"
    "Given the current possible categories, determine if it belongs to one of them. "
    "If so, specify that category; otherwise, say \"none\".\n\n"
    "{content}"
)

_GENERATION_TEMPLATE = (
    "Please generate {count} {object}(s) belonging to the category "
    "'{category}', including title and abstract.\n\n"
    "Output Format:\n"
    "Title: <Generated Title>\n"
    "Abstract: <Generated Abstract>"
)


def chat_key(model: str, prompt: str) -> str:
    return hashlib.sha256(f"{model}\x00{prompt}".encode("utf-8")).hexdigest()


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Chat clients and response cache
# ---------------------------------------------------------------------------

class ChatCache:
    """Append-only jsonl log of chat responses, keyed by hash(model, prompt)."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._records: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        rec = json.loads(line)
                        self._records[rec["key"]] = rec

    def __len__(self) -> int:
        return len(self._records)

    def get(self, key: str) -> dict | None:
        return self._records.get(key)

    def put(self, record: dict) -> None:
        with self._lock:
            if record["key"] in self._records:
                return
            self._records[record["key"]] = record
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(json.dumps(record) + "\n")


class MockChatClient:
    """Deterministic offline chat model.

    Identification prompts are answered by checking whether any listed
    category name appears in the node content (first match wins, else
    "none"). Generation prompts get the requested number of synthetic
    Title/Abstract pairs. A custom ``reply_fn`` overrides both behaviors.
    """

    def __init__(self, reply_fn=None):
        self.reply_fn = reply_fn
        self.calls = 0

    def complete(self, model: str, messages: list[dict], *,
                 temperature: float = 0.0, max_tokens: int = 512) -> str:
        self.calls += 1
        prompt = messages[-1]["content"]
        if self.reply_fn is not None:
            return self.reply_fn(prompt)
        return _default_mock_reply(prompt)


_GEN_PROMPT_RE = re.compile(
    r"Please generate (\d+) .+?\(s\) belonging to the category '([^']*)'")


def _default_mock_reply(prompt: str) -> str:
    gen = _GEN_PROMPT_RE.search(prompt)
    if gen:
        count, category = int(gen.group(1)), gen.group(2)
        blocks = []
        for i in range(1, count + 1):
            blocks.append(
                f"{i}. Title: {category} concept study {i}\n"
                f"Abstract: A synthetic overview of {category.lower()} prepared "
                f"for benchmarking, variant {i}."
            )
        return "\n".join(blocks)

    bracket = re.search(r"\[(.*?)\]", prompt, flags=re.DOTALL)
    marker = 'say "none".'
    content = prompt.rsplit(marker, 1)[-1] if marker in prompt else prompt
    if bracket:
        for name in (c.strip() for c in bracket.group(1).split(",")):
            if name and name.lower() in content.lower():
                return name
    return "none"


class ReplayChatClient:
    """Serves responses recorded in a cache file; never goes to the network."""

    def __init__(self, cache_path: Path | str):
        self._responses: dict[str, str] = {}
        path = Path(cache_path)
        if not path.exists():
            raise FileNotFoundError(f"replay cache not found: {path}")
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    self._responses[rec["key"]] = rec["response"]

    def complete(self, model: str, messages: list[dict], *,
                 temperature: float = 0.0, max_tokens: int = 512) -> str:
        key = chat_key(model, messages[-1]["content"])
        if key not in self._responses:
            raise RuntimeError("no cached response for prompt in replay mode")
        return self._responses[key]


class HttpChatClient:
    """OpenAI-compatible /chat/completions client with retry and backoff.

    Transport errors and 5xx responses are retried up to three times with
    1s/2s/4s waits; 4xx responses fail immediately.
    """

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 timeout: float = 60.0, max_attempts: int = 4):
        self.base_url = (base_url or os.environ.get("GOE_LLM_BASE_URL") or "").rstrip("/")
        self.api_key = api_key or os.environ.get("GOE_LLM_API_KEY")
        self.timeout = timeout
        self.max_attempts = max_attempts
        if not self.base_url:
            raise RuntimeError("no chat endpoint: set GOE_LLM_BASE_URL")

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, route: str, body: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = requests.post(f"{self.base_url}{route}", json=body,
                                     headers=self._headers(), timeout=self.timeout)
                if resp.status_code >= 500:
                    last_error = RuntimeError(f"server error {resp.status_code}")
                elif resp.status_code >= 400:
                    raise RuntimeError(f"request rejected ({resp.status_code}): {resp.text[:200]}")
                else:
                    return resp.json()
            except requests.RequestException as exc:
                last_error = exc
            if attempt + 1 < self.max_attempts:
                time.sleep(2 ** attempt)
        raise RuntimeError(f"chat endpoint unreachable after {self.max_attempts} attempts") \
            from last_error

    def complete(self, model: str, messages: list[dict], *,
                 temperature: float = 0.0, max_tokens: int = 512) -> str:
        data = self._post("/chat/completions", {
            "model": model,
            "messages": messages,
            "temperature": temperature,
            "max_tokens": max_tokens,
        })
        return data["choices"][0]["message"]["content"]


def _cached_complete(client, cache: ChatCache | None, model: str, prompt: str, *,
                     node_id: int | None, temperature: float, max_tokens: int,
                     parse_tag=None) -> str:
    key = chat_key(model, prompt)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit["response"]
    response = client.complete(model, [{"role": "user", "content": prompt}],
                               temperature=temperature, max_tokens=max_tokens)
    if cache is not None:
        cache.put({
            "key": key,
            "node_id": node_id,
            "prompt": prompt,
            "response": response,
            "parsed": parse_tag(response) if parse_tag else "",
            "model": model,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        })
    return response


# ---------------------------------------------------------------------------
# Identification pipeline
# ---------------------------------------------------------------------------

def build_identification_prompt(node_text: str, id_category_names: list[str],
                                object_kind: str) -> str:
    if not node_text:
        raise ValueError("empty node text")
    if not id_category_names:
        raise ValueError("empty category list")
    return _IDENTIFICATION_TEMPLATE.format(
        object=object_kind,
        categories=", ".join(id_category_names),
        content=node_text,
    )


def _normalize(text: str) -> str:
    lowered = text.lower()
    cleaned = re.sub(r"[^a-z0-9]+", " ", lowered)
    return " ".join(cleaned.split())


def parse_identification_response(raw: str, id_category_names: list[str],
                                  ) -> tuple[str, int | None]:
    """Classify a raw chat response as (kind, category_index).

    A standalone token "none" means OOD. Otherwise exactly one category name
    must appear (case-insensitive, punctuation-blind substring); zero or
    several matches are unparseable.
    """
    norm = _normalize(raw)
    if "none" in norm.split():
        return PARSED_OOD, None
    matches = [i for i, name in enumerate(id_category_names)
               if _normalize(name) and _normalize(name) in norm]
    if len(matches) == 1:
        return PARSED_ID, matches[0]
    return PARSED_UNPARSEABLE, None


@dataclass
class LlmAnnotation:
    node_id: int
    raw_response: str
    parsed: str                      # PARSED_ID | PARSED_OOD | PARSED_UNPARSEABLE
    category_index: int | None = None


@dataclass
class PseudoOodSet:
    """Pseudo-OOD supervision: node ids plus how they were obtained.

    In identified mode the ids index the original graph; in generated mode
    they index the augmented graph (range [n, n+m)).
    """

    mode: str                        # "identified" | "generated"
    node_ids: np.ndarray
    provenance: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.node_ids)


def annotation_pool(graph: TextAttributedGraph, split) -> np.ndarray:
    """Unlabeled nodes outside every training/validation/test set."""
    return np.setdiff1d(np.arange(graph.node_count), split.evaluation_nodes())


def identify_pseudo_ood(
    graph: TextAttributedGraph,
    manifest,
    class_split,
    split,
    *,
    client,
    cache: ChatCache | None,
    sample_size: int = 200,
    seed: int = 0,
    model: str = DEFAULT_MODEL,
    concurrency: int = 4,
) -> tuple[PseudoOodSet, list[LlmAnnotation]]:
    """Sample unlabeled nodes, annotate them, keep the ones marked OOD.

    Responses are fetched cache-first and written through, so repeated runs
    over the same cache are deterministic. Annotations come back in node-id
    order regardless of request completion order.
    """
    pool = annotation_pool(graph, split)
    if len(pool) < sample_size:
        raise ValueError(
            f"annotation pool ({len(pool)}) smaller than sample size ({sample_size})"
        )
    rng = stream_rng(seed, STREAM_ANNOTATION_POOL)
    sample = np.sort(rng.choice(pool, size=sample_size, replace=False))

    id_names = [manifest.category_names[c] for c in class_split.id_classes]

    def parse_tag(response: str) -> str:
        kind, idx = parse_identification_response(response, id_names)
        return f"id:{id_names[idx]}" if kind == PARSED_ID else kind

    def annotate(node_id: int) -> LlmAnnotation:
        prompt = build_identification_prompt(graph.texts[node_id], id_names,
                                             manifest.object_kind)
        response = _cached_complete(
            client, cache, model, prompt, node_id=int(node_id),
            temperature=IDENTIFY_TEMPERATURE, max_tokens=IDENTIFY_MAX_TOKENS,
            parse_tag=parse_tag,
        )
        kind, idx = parse_identification_response(response, id_names)
        return LlmAnnotation(node_id=int(node_id), raw_response=response,
                             parsed=kind, category_index=idx)

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool_exec:
        annotations = list(pool_exec.map(annotate, sample))

    if all(a.parsed == PARSED_UNPARSEABLE for a in annotations):
        raise RuntimeError("all annotations unparseable; model or parser failure")

    ood_ids = np.array(
        sorted(a.node_id for a in annotations if a.parsed == PARSED_OOD),
        dtype=np.int64,
    )
    provenance = [{"node_id": a.node_id, "parsed": a.parsed} for a in annotations]
    return PseudoOodSet(mode="identified", node_ids=ood_ids,
                        provenance=provenance), annotations


def annotation_accuracy(annotations: list[LlmAnnotation], labels: np.ndarray,
                        class_split) -> float:
    """Binary accuracy of OOD-vs-ID calls against ground-truth labels.

    Unparseable annotations count as an ID prediction (the conservative
    reading: nothing was confidently rejected).
    """
    if not annotations:
        raise ValueError("empty annotation set")
    labels = np.asarray(labels)
    correct = 0
    total = 0
    for ann in annotations:
        label = labels[ann.node_id]
        if label < 0:
            continue
        truth_ood = label in class_split.ood_classes
        pred_ood = ann.parsed == PARSED_OOD
        correct += int(truth_ood == pred_ood)
        total += 1
    if total == 0:
        raise ValueError("no annotated node has a ground-truth label")
    return correct / total


# ---------------------------------------------------------------------------
# Generation pipeline
# ---------------------------------------------------------------------------

@dataclass
class GeneratedNode:
    category: str
    title: str
    body: str
    text: str = ""
    embedding: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.text:
            self.text = f"{self.title}. {self.body}"


def build_generation_prompt(category_name: str, count: int,
                            object_kind: str) -> str:
    if count < 1:
        raise ValueError("count must be >= 1")
    if not category_name:
        raise ValueError("empty category name")
    return _GENERATION_TEMPLATE.format(count=count, object=object_kind,
                                       category=category_name)


_FIELD_MARKER_RE = re.compile(
    r"^\s*(?:[-*•]\s*)?(?:\d+[.)]\s*)?\**(title|abstract)\**\s*:\s*(.*)$",
    re.IGNORECASE,
)


def parse_generation_response(raw: str, category: str = "") -> list[GeneratedNode]:
    """Extract Title/Abstract pairs from a generation response.

    Tolerates list bullets, numbering and bold markers around the field
    names. Only complete title+abstract pairs become nodes; a trailing title
    without an abstract is dropped.
    """
    nodes: list[GeneratedNode] = []
    title: str | None = None
    abstract: str | None = None
    current: str | None = None

    def flush() -> None:
        nonlocal title, abstract
        if title and abstract:
            t, a = title.strip(), abstract.strip()
            if t and a:
                nodes.append(GeneratedNode(category=category, title=t, body=a))
        title = abstract = None

    for line in raw.splitlines():
        m = _FIELD_MARKER_RE.match(line)
        if m:
            kind = m.group(1).lower()
            value = m.group(2).strip().strip("*").strip()
            if kind == "title":
                flush()
                title = value
                current = "title"
            else:
                abstract = value if abstract is None else f"{abstract} {value}"
                current = "abstract"
        elif line.strip():
            if current == "title" and title is not None:
                title = f"{title} {line.strip()}"
            elif current == "abstract" and abstract is not None:
                abstract = f"{abstract} {line.strip()}"
    flush()

    if not nodes:
        raise ValueError("unparseable generation")
    return nodes


def generate_pseudo_ood(
    ood_category_names: list[str],
    *,
    per_class: int | list[int] = 10,
    object_kind: str,
    client,
    cache: ChatCache | None,
    model: str = DEFAULT_MODEL,
) -> tuple[list[GeneratedNode], list[dict]]:
    """Generate pseudo-OOD texts for each OOD category.

    One chat call per category, plus a single follow-up for the shortfall if
    the first response parsed to fewer nodes than requested. A category that
    still yields nothing raises; a partial yield is recorded as a warning.
    """
    if not ood_category_names:
        raise ValueError("no OOD categories to generate from")
    if isinstance(per_class, int):
        quotas = [per_class] * len(ood_category_names)
    else:
        quotas = list(per_class)
        if len(quotas) != len(ood_category_names):
            raise ValueError("per-category quota list does not match category list")

    nodes: list[GeneratedNode] = []
    warnings: list[dict] = []
    for name, quota in zip(ood_category_names, quotas):
        if quota <= 0:
            continue
        collected = _generate_for_category(name, quota, object_kind, client, cache, model)
        if len(collected) < quota:
            missing = quota - len(collected)
            retry = _generate_for_category(name, missing, object_kind, client, cache, model)
            collected.extend(retry)
        if not collected:
            raise RuntimeError(f"generation yielded no nodes for category {name!r}")
        if len(collected) < quota:
            warnings.append({
                "category": name, "requested": quota, "produced": len(collected),
            })
        nodes.extend(collected[:quota])
    return nodes, warnings


def _generate_for_category(name: str, count: int, object_kind: str, client,
                           cache: ChatCache | None, model: str) -> list[GeneratedNode]:
    prompt = build_generation_prompt(name, count, object_kind)
    response = _cached_complete(
        client, cache, model, prompt, node_id=None,
        temperature=GENERATE_TEMPERATURE, max_tokens=GENERATE_MAX_TOKENS,
        parse_tag=lambda _: "generation",
    )
    try:
        return parse_generation_response(response, category=name)
    except ValueError:
        return []


def save_generated(nodes: list[GeneratedNode], path: Path | str) -> None:
    with Path(path).open("w") as fh:
        for node in nodes:
            fh.write(json.dumps({
                "category": node.category, "title": node.title, "abstract": node.body,
            }) + "\n")


def load_generated(path: Path | str) -> list[GeneratedNode]:
    nodes = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                nodes.append(GeneratedNode(category=rec["category"],
                                           title=rec["title"], body=rec["abstract"]))
    return nodes


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------

class HashEmbeddingProvider:
    """Deterministic unit vector per text, seeded from the text's hash."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self._dim), dtype=np.float64)
        for i, text in enumerate(texts):
            seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8],
                                  "little")
            v = np.random.default_rng(seed).standard_normal(self._dim)
            norm = np.linalg.norm(v)
            out[i] = v / norm if norm > 0 else np.eye(self._dim)[0]
        return out


class PrecomputedEmbeddingProvider:
    """Looks embeddings up in a jsonl file keyed by sha256 of the text."""

    def __init__(self, path: Path | str):
        self._table: dict[str, np.ndarray] = {}
        dim = None
        with Path(path).open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                vec = np.asarray(rec["vector"], dtype=np.float64)
                if dim is None:
                    dim = vec.shape[0]
                elif vec.shape[0] != dim:
                    raise ValueError("inconsistent vector dimensions in embedding file")
                self._table[rec["key"]] = vec
        if dim is None:
            raise ValueError("embedding file is empty")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self._dim), dtype=np.float64)
        for i, text in enumerate(texts):
            key = text_key(text)
            if key not in self._table:
                raise KeyError(f"no precomputed embedding for text hash {key[:12]}...")
            out[i] = self._table[key]
        return out


class HttpEmbeddingProvider:
    """OpenAI-compatible /embeddings client with the chat client's retry policy."""

    def __init__(self, model: str, base_url: str | None = None,
                 api_key: str | None = None, dim: int | None = None,
                 batch_size: int = 64, timeout: float = 60.0):
        self.model = model
        self.batch_size = batch_size
        self._dim = dim
        self._http = HttpChatClient(base_url=base_url, api_key=api_key, timeout=timeout)

    @property
    def dim(self) -> int:
        if self._dim is None:
            raise RuntimeError("embedding dimension unknown until the first request")
        return self._dim

    def embed(self, texts: list[str]) -> np.ndarray:
        rows: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start:start + self.batch_size]
            data = self._http._post("/embeddings", {"model": self.model, "input": batch})
            items = sorted(data["data"], key=lambda item: item["index"])
            rows.extend(np.asarray(item["embedding"], dtype=np.float64) for item in items)
        if not rows:
            return np.zeros((0, self._dim or 0), dtype=np.float64)
        out = np.vstack(rows)
        if self._dim is None:
            self._dim = out.shape[1]
        return out


def embed_texts(provider, texts: list[str],
                expected_dim: int | None = None) -> np.ndarray:
    """Embed texts and validate shape/finiteness against the graph dimension."""
    if not texts:
        dim = expected_dim if expected_dim is not None else provider.dim
        return np.zeros((0, dim), dtype=np.float64)
    matrix = provider.embed(list(texts))
    if matrix.shape[0] != len(texts):
        raise ValueError("provider returned wrong number of rows")
    if expected_dim is not None and matrix.shape[1] != expected_dim:
        raise ValueError(
            f"embedding dimension mismatch: provider {matrix.shape[1]}, graph {expected_dim}"
        )
    if not np.all(np.isfinite(matrix)):
        raise ValueError("non-finite embedding entry")
    return matrix


# ---------------------------------------------------------------------------
# Graph augmentation
# ---------------------------------------------------------------------------

@dataclass
class AugmentedGraph:
    """Original graph plus appended generated nodes.

    The first ``base_node_count`` embedding rows are bitwise identical to the
    source graph; generated nodes occupy ids [base_node_count, node_count).
    """

    graph: TextAttributedGraph
    base_node_count: int
    generated_ids: np.ndarray


def augment_graph(
    graph: TextAttributedGraph,
    generated: list[GeneratedNode],
    edge_mode: str = "none",
    knn_k: int = 5,
) -> tuple[AugmentedGraph, PseudoOodSet]:
    """Append generated nodes to the graph.

    ``edge_mode="none"`` adds no edges (generated nodes only interact through
    the self-loop added at normalization); ``"knn"`` connects each generated
    node to its ``knn_k`` most cosine-similar original nodes, ties broken by
    lower node id.
    """
    if not generated:
        raise ValueError("no generated nodes to insert")
    for node in generated:
        if node.embedding is None:
            raise ValueError("generated node is missing its embedding")
    n = graph.node_count
    m = len(generated)

    new_rows = np.asarray([node.embedding for node in generated])
    embeddings = np.vstack([graph.embeddings,
                            new_rows.astype(graph.embeddings.dtype)])
    texts = list(graph.texts) + [node.text for node in generated]
    labels = np.concatenate([graph.labels, np.full(m, -1, dtype=np.int64)])

    if edge_mode == "none":
        edges = graph.edges.copy()
    elif edge_mode == "knn":
        if knn_k >= n:
            raise ValueError("knn_k must be smaller than the original node count")
        base = graph.embeddings.astype(np.float64)
        base_norm = np.linalg.norm(base, axis=1)
        base_norm[base_norm == 0] = 1.0
        extra = []
        for offset, node in enumerate(generated):
            v = np.asarray(node.embedding, dtype=np.float64)
            v_norm = np.linalg.norm(v) or 1.0
            sims = (base @ v) / (base_norm * v_norm)
            order = np.argsort(-sims, kind="mergesort")[:knn_k]
            for target in order:
                extra.append((int(target), n + offset))
        edges = np.unique(
            np.vstack([graph.edges.reshape(-1, 2), np.array(extra, dtype=np.int64)]),
            axis=0,
        )
    else:
        raise ValueError(f"unknown edge_mode {edge_mode!r}")

    combined = TextAttributedGraph(
        node_count=n + m, edges=edges, texts=texts,
        embeddings=embeddings, labels=labels,
    )
    combined.validate()
    generated_ids = np.arange(n, n + m, dtype=np.int64)
    pseudo = PseudoOodSet(
        mode="generated",
        node_ids=generated_ids,
        provenance=[{"category": g.category, "title": g.title} for g in generated],
    )
    return AugmentedGraph(graph=combined, base_node_count=n,
                          generated_ids=generated_ids), pseudo


def save_pseudo_set(pseudo: PseudoOodSet, path: Path | str) -> None:
    Path(path).write_text(json.dumps({
        "mode": pseudo.mode,
        "node_ids": [int(v) for v in pseudo.node_ids],
        "provenance": pseudo.provenance,
    }, indent=2) + "\n")


def load_pseudo_set(path: Path | str) -> PseudoOodSet:
    data = json.loads(Path(path).read_text())
    return PseudoOodSet(
        mode=data["mode"],
        node_ids=np.array(data["node_ids"], dtype=np.int64),
        provenance=list(data.get("provenance", [])),
    )
