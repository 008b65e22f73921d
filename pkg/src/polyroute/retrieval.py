"""Retrieval-augmented context assembly: chunk the gold passage, embed the
chunks with the arm's backend, and keep the top-k chunks by cosine similarity
to the question. Search is exact brute force; passages here are single
paragraphs, so correctness beats ANN cleverness.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import QARecord
from .gateway import EmbeddingClient, EmbeddingVector

INDEX_FORMAT_VERSION = 1


class IndexBuildError(RuntimeError):
    def __init__(self, message: str, chunk_ids: list[str]):
        super().__init__(message)
        self.chunk_ids = chunk_ids


class RetrievalError(RuntimeError):
    pass


@dataclass(frozen=True)
class Chunk:
    id: str
    record_id: str
    text: str
    char_span: tuple[int, int]
    vector: EmbeddingVector | None = None


@dataclass(frozen=True)
class RetrievalConfig:
    chunk_chars: int = 512
    overlap_chars: int = 64
    k: int = 2
    enabled: bool = True

    def __post_init__(self):
        if not 0 <= self.overlap_chars < self.chunk_chars:
            raise ValueError(f"need 0 <= overlap < chunk size, got {self.overlap_chars}/{self.chunk_chars}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1: {self.k}")

    def cache_key(self) -> str:
        raw = f"{self.chunk_chars}:{self.overlap_chars}:{self.k}"
        return hashlib.sha256(raw.encode()).hexdigest()[:16]


def chunk_context(context: str, cfg: RetrievalConfig, record_id: str = "") -> list[Chunk]:
    """Tile the context into overlapping chunks, snapping ends to whitespace."""
    if not context:
        raise ValueError("context must be non-empty")
    n = len(context)
    chunks: list[Chunk] = []
    start = 0
    while start < n:
        end = min(start + cfg.chunk_chars, n)
        if end < n:
            # snap backward to whitespace when that still leaves real content
            snapped = _last_whitespace(context, start + 1, end)
            if snapped is not None and snapped > start + cfg.overlap_chars:
                end = snapped
        chunks.append(
            Chunk(
                id=f"{record_id}:{len(chunks)}",
                record_id=record_id,
                text=context[start:end],
                char_span=(start, end),
            )
        )
        if end >= n:
            break
        start = max(end - cfg.overlap_chars, start + 1)
    return chunks


def _last_whitespace(text: str, lo: int, hi: int) -> int | None:
    for pos in range(hi, lo, -1):
        if text[pos - 1].isspace():
            return pos
    return None


@dataclass
class Index:
    backend: str
    dimension: int
    chunks: list[Chunk]
    matrix: np.ndarray  # row-normalized, one row per chunk

    def __len__(self) -> int:
        return len(self.chunks)


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


def build_index(chunks: list[Chunk], backend: str, embed_client: EmbeddingClient) -> Index:
    """Embed every chunk with the declared backend and store normalized rows."""
    if not chunks:
        raise ValueError("chunks must be non-empty")
    if embed_client.backend != backend:
        raise IndexBuildError(
            f"client backend {embed_client.backend!r} != declared {backend!r}",
            [c.id for c in chunks],
        )
    for chunk in chunks:
        if chunk.vector is not None and chunk.vector.backend != backend:
            raise IndexBuildError(f"chunk {chunk.id} carries a {chunk.vector.backend} vector", [chunk.id])
    try:
        vectors = embed_client.embed([c.text for c in chunks])
    except Exception as exc:
        raise IndexBuildError(f"embedding failed: {exc}", [c.id for c in chunks]) from exc
    matrix = _normalize_rows(np.array([v.values for v in vectors], dtype=np.float64))
    embedded = [
        Chunk(c.id, c.record_id, c.text, c.char_span, vector=v) for c, v in zip(chunks, vectors)
    ]
    return Index(backend=backend, dimension=matrix.shape[1], chunks=embedded, matrix=matrix)


def retrieve(
    index: Index, question: str, k: int, embed_client: EmbeddingClient
) -> list[tuple[Chunk, float]]:
    """Top-min(k, n) chunks by cosine similarity, ties broken by chunk id."""
    if k < 1:
        raise ValueError(f"k must be >= 1: {k}")
    if len(index) == 0:
        raise RetrievalError("cannot retrieve from an empty index")
    if embed_client.backend != index.backend:
        raise RetrievalError(f"query backend {embed_client.backend!r} != index backend {index.backend!r}")
    qvec = np.array(embed_client.embed([question])[0].values, dtype=np.float64)
    norm = np.linalg.norm(qvec)
    if norm > 0:
        qvec = qvec / norm
    similarities = index.matrix @ qvec
    order = sorted(range(len(index)), key=lambda i: (-similarities[i], index.chunks[i].id))
    return [(index.chunks[i], float(similarities[i])) for i in order[:k]]


def working_context(
    record: QARecord,
    backend: str,
    cfg: RetrievalConfig,
    embed_client: EmbeddingClient,
    question: str | None = None,
) -> str:
    """Context handed to the strategy: retrieved chunks in document order,
    or the full gold context when retrieval is disabled."""
    if not cfg.enabled:
        return record.context
    chunks = chunk_context(record.context, cfg, record_id=record.id)
    index = build_index(chunks, backend, embed_client)
    hits = retrieve(index, question or record.question, cfg.k, embed_client)
    ordered = sorted((chunk for chunk, _ in hits), key=lambda c: c.char_span[0])
    return "\n".join(c.text for c in ordered)


def save_index(index: Index, path: str | Path) -> None:
    """Persist an index as a binary sidecar with a versioned header."""
    meta = {
        "version": INDEX_FORMAT_VERSION,
        "backend": index.backend,
        "dimension": index.dimension,
        "count": len(index),
        "chunks": [
            {"id": c.id, "record_id": c.record_id, "text": c.text, "span": list(c.char_span)}
            for c in index.chunks
        ],
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            meta=np.frombuffer(json.dumps(meta, ensure_ascii=False).encode("utf-8"), dtype=np.uint8),
            matrix=index.matrix,
        )


def load_index(path: str | Path) -> Index:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        matrix = data["matrix"]
    if meta.get("version") != INDEX_FORMAT_VERSION:
        raise RetrievalError(f"unsupported index format version {meta.get('version')}")
    chunks = [
        Chunk(id=c["id"], record_id=c["record_id"], text=c["text"], char_span=tuple(c["span"]))
        for c in meta["chunks"]
    ]
    return Index(backend=meta["backend"], dimension=meta["dimension"], chunks=chunks, matrix=matrix)


def index_cache_path(cache_dir: str | Path, record_id: str, backend: str, cfg: RetrievalConfig) -> Path:
    key = hashlib.sha256(f"{record_id}:{backend}:{cfg.cache_key()}".encode("utf-8")).hexdigest()[:24]
    return Path(cache_dir) / f"index-{key}.npz"
