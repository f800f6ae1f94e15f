from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest

from dqmap import (
    Backends,
    HierarchyOracleClassifier,
    PipelineConfig,
    QuestionNode,
    ScorerConfig,
    SectionId,
    TemplateQuestionGenerator,
    TfidfEmbedder,
    run_pipeline,
)

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def mini_textbook_path() -> Path:
    return DATA_DIR / "mini_textbook.md"


@pytest.fixture(scope="session")
def mini_textbook(mini_textbook_path: Path) -> str:
    return mini_textbook_path.read_text(encoding="utf-8")


def make_config(input_path: Path, output_dir: Path, **overrides) -> PipelineConfig:
    defaults = dict(target_nodes=12, seed=7, scorer=ScorerConfig())
    defaults.update(overrides)
    return PipelineConfig(
        input_path=str(input_path),
        output_dir=str(output_dir),
        **defaults,
    )


@pytest.fixture(scope="session")
def pipeline_dir(tmp_path_factory, mini_textbook_path: Path) -> Path:
    """A completed baseline pipeline run, shared by read-only tests."""
    out = tmp_path_factory.mktemp("pipeline")
    run_pipeline(make_config(mini_textbook_path, out))
    return out


def offline_backends() -> Backends:
    return Backends(
        embedder=TfidfEmbedder(),
        classifier=HierarchyOracleClassifier(),
        generator=TemplateQuestionGenerator(),
    )


def make_nodes(
    count: int,
    sections: list[SectionId | tuple[int, ...]] | None = None,
    seed: int | None = None,
    dim: int = 8,
) -> list[QuestionNode]:
    """Question nodes with distinct texts; random unit embeddings if seeded.

    Without explicit ``sections``, node i lands in chapter (i + 1,), which
    keeps the hierarchy oracle usable (all pairs are unrelated).
    """
    rng = random.Random(seed)
    nodes = []
    for i in range(count):
        embedding = None
        if seed is not None:
            raw = np.array([rng.gauss(0.0, 1.0) for _ in range(dim)])
            embedding = raw / np.linalg.norm(raw)
        section = sections[i] if sections else (i + 1,)
        if not isinstance(section, SectionId):
            section = SectionId(tuple(section))
        nodes.append(
            QuestionNode(
                node_id=f"q_{i:05d}",
                question=f"What is topic {i}?",
                context=f"Topic {i} concerns subject matter number {i}.",
                chunk_id=f"chk_{i:05d}",
                embedding=embedding,
                section_id=section,
            )
        )
    return nodes
