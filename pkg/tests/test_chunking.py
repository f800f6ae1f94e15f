from __future__ import annotations

import json
import re

import numpy as np
import pytest

from dqmap import (
    ChunkingConfig,
    TfidfEmbedder,
    chunk_sections,
    parse_outline,
    read_chunks_jsonl,
    write_chunks_jsonl,
)


class StubEmbedder:
    """Returns preassigned unit vectors per text, in call order."""

    def __init__(self, vectors_by_text: dict[str, list[float]]):
        self.vectors_by_text = vectors_by_text

    def embed(self, texts):
        return np.array([self.vectors_by_text[t] for t in texts], dtype=float)


def test_single_paragraph_section_is_one_chunk():
    doc = "# A\n\nonly one paragraph here\n"
    outline = parse_outline(doc)
    chunks = chunk_sections(outline, doc, TfidfEmbedder())
    assert len(chunks) == 1
    assert chunks[0].text == "only one paragraph here"
    assert chunks[0].section_id.segments == (1,)


def test_chunks_never_cross_section_boundary(mini_textbook):
    outline = parse_outline(mini_textbook)
    chunks = chunk_sections(outline, mini_textbook, TfidfEmbedder())
    spans = {s.id.code: s.body_span for s in outline.sections}
    for chunk in chunks:
        lo, hi = spans[chunk.section_id.code]
        assert lo <= chunk.char_span[0] and chunk.char_span[1] <= hi


def test_percentile_breakpoint_hand_example():
    # four paragraphs with adjacent similarities [0.9, 0.1, 0.9]; the 25th
    # percentile of those is 0.5, so only the middle boundary breaks
    paragraphs = ["p one", "p two", "p three", "p four"]
    doc = "# A\n\n" + "\n\n".join(paragraphs) + "\n"
    vectors = {
        "p one": [1.0, 0.0, 0.0],
        "p two": [0.9, np.sqrt(1 - 0.81), 0.0],
        "p three": [0.0, 0.0, 1.0],
    }
    # cos(two, three) = 0: place three orthogonally, then four at 0.9 to three
    vectors["p four"] = [0.0, np.sqrt(1 - 0.81), 0.9]
    sim_23 = float(np.dot(vectors["p two"], vectors["p three"]))
    assert sim_23 == pytest.approx(0.0, abs=1e-12)
    # adjust: want [0.9, 0.1, 0.9]; rotate three slightly toward two
    vectors["p three"] = [
        0.1 * v + np.sqrt(1 - 0.01) * w
        for v, w in zip(vectors["p two"], [0.0, 0.0, 1.0])
    ]
    vectors["p four"] = [
        0.9 * v + np.sqrt(1 - 0.81) * w
        for v, w in zip(vectors["p three"], np.cross(vectors["p two"], vectors["p three"]))
    ]
    sims = [
        float(np.dot(vectors[a], vectors[b]))
        for a, b in zip(paragraphs, paragraphs[1:])
    ]
    assert sims == pytest.approx([0.9, 0.1, 0.9], abs=1e-9)

    outline = parse_outline(doc)
    chunks = chunk_sections(outline, doc, StubEmbedder(vectors))
    assert len(chunks) == 2
    assert chunks[0].text == "p one\n\np two"
    assert chunks[1].text == "p three\n\np four"


def test_max_chars_forces_break():
    long_a = "alpha " * 60
    long_b = "alpha " * 60
    doc = f"# A\n\n{long_a.strip()}\n\n{long_b.strip()}\n"
    outline = parse_outline(doc)
    config = ChunkingConfig(percentile=25.0, max_chars=400)
    chunks = chunk_sections(outline, doc, TfidfEmbedder(), config)
    assert len(chunks) == 2
    assert all(len(c.text) <= 400 for c in chunks)


def test_identical_paragraphs_stay_together():
    doc = "# A\n\nsame words here\n\nsame words here\n\nsame words here\n"
    outline = parse_outline(doc)
    chunks = chunk_sections(outline, doc, TfidfEmbedder())
    assert len(chunks) == 1


def test_empty_section_yields_no_chunks():
    doc = "# A\n\n## B\n\ncontent\n"
    outline = parse_outline(doc)
    chunks = chunk_sections(outline, doc, TfidfEmbedder())
    assert [c.section_id.segments for c in chunks] == [(1, 1)]


def test_chunk_ids_ordered_by_span():
    doc = "# A\n\none\n\n## B\n\ntwo\n\n# C\n\nthree\n"
    outline = parse_outline(doc)
    chunks = chunk_sections(outline, doc, TfidfEmbedder())
    assert [c.chunk_id for c in chunks] == ["chk_00000", "chk_00001", "chk_00002"]
    starts = [c.char_span[0] for c in chunks]
    assert starts == sorted(starts)


def test_chunk_spans_cover_section_words(mini_textbook):
    outline = parse_outline(mini_textbook)
    chunks = chunk_sections(outline, mini_textbook, TfidfEmbedder())
    covered = set()
    for chunk in chunks:
        covered.update(range(*chunk.char_span))
    for section in outline.sections:
        for match in re.finditer(r"\w", mini_textbook[slice(*section.body_span)]):
            assert section.body_span[0] + match.start() in covered


def test_chunking_deterministic(mini_textbook):
    outline = parse_outline(mini_textbook)
    first = chunk_sections(outline, mini_textbook, TfidfEmbedder())
    second = chunk_sections(outline, mini_textbook, TfidfEmbedder())
    assert first == second


def test_jsonl_round_trip_and_field_order(tmp_path, mini_textbook):
    outline = parse_outline(mini_textbook)
    chunks = chunk_sections(outline, mini_textbook, TfidfEmbedder())
    path = tmp_path / "chunks.jsonl"
    write_chunks_jsonl(path, chunks)
    assert read_chunks_jsonl(path) == chunks
    first_line = path.read_text(encoding="utf-8").splitlines()[0]
    assert list(json.loads(first_line)) == ["chunk_id", "section_id", "text", "span"]
