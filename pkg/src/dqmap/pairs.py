"""Labeled context-pair dataset for specificity classification.

Every ordered chunk pair whose sections are in a direct parent-child
relationship is emitted as ``general``; the swapped pair as ``specific``;
an equal number of ``other`` pairs is sampled, without replacement, from
the ordered pairs that are parent-child in neither direction. The three
class counts are therefore always equal and the total is a multiple of
three by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .chunking import Chunk
from .errors import ValidationError
from .outline import (
    LABEL_GENERAL,
    LABEL_OTHER,
    LABEL_SPECIFIC,
    SectionId,
    section_relationship,
)

# Sampling is pinned to a partial Fisher-Yates shuffle driven by the stdlib
# Mersenne Twister, so the byte output depends only on (chunks, seed).
PRNG_ID = "mt19937+fisher-yates"


@dataclass(frozen=True)
class PairExample:
    chunk_a: str
    chunk_b: str
    context_a: str
    context_b: str
    section_a: SectionId
    section_b: SectionId
    label: str


@dataclass
class PairDatasetStats:
    n_chunks: int
    n_pairs: int
    n_general: int
    n_specific: int
    n_other: int
    n_chapters: int
    n_sections: int
    depth_avg: float
    depth_max: int

    def to_dict(self) -> dict:
        return {
            "n_chunks": self.n_chunks,
            "n_pairs": self.n_pairs,
            "n_general": self.n_general,
            "n_specific": self.n_specific,
            "n_other": self.n_other,
            "n_chapters": self.n_chapters,
            "n_sections": self.n_sections,
            "depth_avg": self.depth_avg,
            "depth_max": self.depth_max,
        }


def _pair(a: Chunk, b: Chunk, label: str) -> PairExample:
    return PairExample(
        chunk_a=a.chunk_id,
        chunk_b=b.chunk_id,
        context_a=a.text,
        context_b=b.text,
        section_a=a.section_id,
        section_b=b.section_id,
        label=label,
    )


def sample_without_replacement(n: int, k: int, rng: random.Random) -> list[int]:
    """First k positions of a Fisher-Yates shuffle of range(n)."""
    index = list(range(n))
    for i in range(k):
        j = rng.randrange(i, n)
        index[i], index[j] = index[j], index[i]
    return index[:k]


def build_pair_dataset(
    chunks: Sequence[Chunk], seed: int
) -> tuple[list[PairExample], PairDatasetStats]:
    """Build the balanced pair dataset; deterministic given (chunks, seed).

    Output order: all general pairs ordered by chunk id, their swapped
    specific counterparts in the same order, then the sampled other pairs
    in sampling order.
    """
    ordered = sorted(chunks, key=lambda c: c.chunk_id)
    generals: list[PairExample] = []
    other_candidates: list[tuple[Chunk, Chunk]] = []
    for a in ordered:
        for b in ordered:
            if a.chunk_id == b.chunk_id:
                continue
            rel = section_relationship(a.section_id, b.section_id)
            if rel == LABEL_GENERAL:
                generals.append(_pair(a, b, LABEL_GENERAL))
            elif rel == LABEL_OTHER:
                other_candidates.append((a, b))

    if not generals:
        raise ValidationError(
            "degenerate hierarchy: no direct parent-child section pair has "
            "chunks on both sides"
        )
    needed = len(generals)
    if len(other_candidates) < needed:
        raise ValidationError(
            f"not enough 'other' candidates: need {needed}, have "
            f"{len(other_candidates)} (shortfall {needed - len(other_candidates)})"
        )

    specifics = [
        PairExample(
            chunk_a=p.chunk_b,
            chunk_b=p.chunk_a,
            context_a=p.context_b,
            context_b=p.context_a,
            section_a=p.section_b,
            section_b=p.section_a,
            label=LABEL_SPECIFIC,
        )
        for p in generals
    ]

    rng = random.Random(seed)
    picks = sample_without_replacement(len(other_candidates), needed, rng)
    others = [_pair(*other_candidates[i], LABEL_OTHER) for i in picks]

    pairs = generals + specifics + others
    return pairs, dataset_stats(ordered, pairs)


def dataset_stats(
    chunks: Sequence[Chunk], pairs: Sequence[PairExample]
) -> PairDatasetStats:
    """Corpus statistics: chunk/pair/label counts plus hierarchy depth figures."""
    sections = {c.section_id for c in chunks}
    depths = [c.section_id.depth for c in chunks]
    labels = [p.label for p in pairs]
    return PairDatasetStats(
        n_chunks=len(chunks),
        n_pairs=len(pairs),
        n_general=labels.count(LABEL_GENERAL),
        n_specific=labels.count(LABEL_SPECIFIC),
        n_other=labels.count(LABEL_OTHER),
        n_chapters=len({s.segments[0] for s in sections}),
        n_sections=len(sections),
        depth_avg=sum(depths) / len(depths) if depths else 0.0,
        depth_max=max(depths) if depths else 0,
    )


def split_pairs(
    pairs: Sequence[PairExample], ratios: Sequence[float], seed: int
) -> list[list[PairExample]]:
    """Seeded shuffle split into len(ratios) parts; ratios must sum to 1."""
    if not ratios or abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValidationError(f"split ratios must be non-negative and sum to 1: {ratios}")
    rng = random.Random(seed)
    order = sample_without_replacement(len(pairs), len(pairs), rng)
    shuffled = [pairs[i] for i in order]
    parts: list[list[PairExample]] = []
    start = 0
    for i, ratio in enumerate(ratios):
        end = len(shuffled) if i == len(ratios) - 1 else start + round(ratio * len(shuffled))
        parts.append(shuffled[start:end])
        start = end
    return parts


def write_pairs_jsonl(
    path: "str | Path", pairs: Sequence[PairExample], seed: int
) -> None:
    """Header line recording the sampling parameters, then one pair per line."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"seed": seed, "prng": PRNG_ID, "n_pairs": len(pairs)}
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for p in pairs:
            record = {
                "context_a": p.context_a,
                "context_b": p.context_b,
                "section_a": p.section_a.code,
                "section_b": p.section_b.code,
                "label": p.label,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_pairs_jsonl(path: "str | Path") -> tuple[dict, list[PairExample]]:
    """Returns (header, pairs); chunk ids are not stored in the file."""
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ValidationError(f"empty pairs file: {path}")
    header = json.loads(lines[0])
    pairs: list[PairExample] = []
    for line in lines[1:]:
        record = json.loads(line)
        pairs.append(
            PairExample(
                chunk_a="",
                chunk_b="",
                context_a=record["context_a"],
                context_b=record["context_b"],
                section_a=SectionId.parse(record["section_a"]),
                section_b=SectionId.parse(record["section_b"]),
                label=record["label"],
            )
        )
    return header, pairs
