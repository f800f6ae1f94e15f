"""Section-confined semantic chunking.

Within each section, paragraph boundaries are the only breakpoint
candidates. A boundary becomes a breakpoint when the cosine similarity of
the adjacent paragraph embeddings falls below the p-th percentile of all
adjacent similarities in that section, or when the accumulated chunk would
exceed ``max_chars``. Section boundaries are always breakpoints, so no
chunk ever crosses a section. Splits below paragraph level are never made,
so a single oversized paragraph stays one chunk.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .outline import Outline, SectionId


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> "np.ndarray": ...

_WORD_RE = re.compile(r"\w")


@dataclass(frozen=True)
class ChunkingConfig:
    percentile: float = 25.0
    max_chars: int = 2000


@dataclass(frozen=True)
class Chunk:
    """A semantically coherent text segment confined to one section."""

    chunk_id: str
    section_id: SectionId
    text: str
    char_span: tuple[int, int]


def _paragraph_spans(document: str, start: int, end: int) -> list[tuple[int, int]]:
    """Blank-line separated blocks inside [start, end), trimmed to content.

    Blocks without a single word character (horizontal rules, decoration)
    are glued onto a neighbouring block so that every paragraph is
    embeddable and no non-whitespace content is dropped.
    """
    spans: list[tuple[int, int]] = []
    offset = start
    block_start: int | None = None
    for line in document[start:end].splitlines(keepends=True):
        if line.strip():
            if block_start is None:
                block_start = offset
        elif block_start is not None:
            spans.append((block_start, offset))
            block_start = None
        offset += len(line)
    if block_start is not None:
        spans.append((block_start, offset))

    trimmed: list[tuple[int, int]] = []
    for a, b in spans:
        while a < b and document[a].isspace():
            a += 1
        while b > a and document[b - 1].isspace():
            b -= 1
        if a < b:
            trimmed.append((a, b))

    merged: list[tuple[int, int]] = []
    pending: tuple[int, int] | None = None
    for a, b in trimmed:
        if _WORD_RE.search(document[a:b]):
            if pending is not None:
                a = pending[0]
                pending = None
            merged.append((a, b))
        elif merged:
            merged[-1] = (merged[-1][0], b)
        elif pending is None:
            pending = (a, b)
        else:
            pending = (pending[0], b)
    if pending is not None:
        # section contains no words at all; keep it as one opaque paragraph
        merged.append(pending)
    return merged


def chunk_sections(
    outline: Outline,
    document: str,
    embedder: Embedder,
    config: ChunkingConfig = ChunkingConfig(),
) -> list[Chunk]:
    """Split every section body into chunks; returns chunks in document order.

    Deterministic given (document, embedder, config). Sections with empty
    bodies yield no chunks. Front matter (before the first heading) is not
    chunked.
    """
    per_section: list[tuple[SectionId, list[tuple[int, int]]]] = []
    for node in outline.sections:
        body_start, body_end = node.body_span
        if body_start >= body_end:
            continue
        paras = _paragraph_spans(document, body_start, body_end)
        if paras:
            per_section.append((node.id, paras))

    texts: list[str] = []
    row_of: dict[tuple[int, int], int] = {}
    for _, paras in per_section:
        for span in paras:
            text = document[span[0]:span[1]]
            if _WORD_RE.search(text):
                row_of[span] = len(texts)
                texts.append(text)
    if texts:
        vectors = np.asarray(embedder.embed(texts), dtype=float)
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        vectors = vectors / np.where(norms == 0.0, 1.0, norms)
    else:
        vectors = np.zeros((0, 0))

    chunk_spans: list[tuple[SectionId, tuple[int, int]]] = []
    for section_id, paras in per_section:
        if len(paras) == 1:
            groups = [paras]
        else:
            sims: list[float] = []
            for left, right in zip(paras, paras[1:]):
                li, ri = row_of.get(left), row_of.get(right)
                if li is None or ri is None:
                    sims.append(1.0)
                else:
                    sims.append(float(np.dot(vectors[li], vectors[ri])))
            threshold = float(np.percentile(np.asarray(sims), config.percentile))
            groups = []
            current = [paras[0]]
            for sim, para in zip(sims, paras[1:]):
                too_long = para[1] - current[0][0] > config.max_chars
                if sim < threshold or too_long:
                    groups.append(current)
                    current = [para]
                else:
                    current.append(para)
            groups.append(current)
        for group in groups:
            chunk_spans.append((section_id, (group[0][0], group[-1][1])))

    chunk_spans.sort(key=lambda item: item[1][0])
    return [
        Chunk(
            chunk_id=f"chk_{i:05d}",
            section_id=section_id,
            text=document[a:b],
            char_span=(a, b),
        )
        for i, (section_id, (a, b)) in enumerate(chunk_spans)
    ]


def write_chunks_jsonl(path: "str | Path", chunks: Sequence[Chunk]) -> None:
    """One JSON object per line; field order is part of the contract."""
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            record = {
                "chunk_id": chunk.chunk_id,
                "section_id": chunk.section_id.code,
                "text": chunk.text,
                "span": list(chunk.char_span),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_chunks_jsonl(path: "str | Path") -> list[Chunk]:
    chunks: list[Chunk] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            chunks.append(
                Chunk(
                    chunk_id=record["chunk_id"],
                    section_id=SectionId.parse(record["section_id"]),
                    text=record["text"],
                    char_span=(record["span"][0], record["span"][1]),
                )
            )
    return chunks
