"""Staged pipeline: ingest -> pairs -> questions -> score -> build -> export -> eval.

Every stage reads plain JSON/JSONL artifacts from the output directory and
writes its own, so any stage can be rerun in isolation. A manifest records,
per stage, the input hashes, the hash of the stage-relevant configuration
slice, and the hashes of every output file; a stage whose recorded hashes
all still match is skipped unless forced.

All randomness flows from the single config seed, forked per stage by
hashing "{seed}:{stage}", so stages stay independently reproducible.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .chunking import Chunk, ChunkingConfig, chunk_sections, read_chunks_jsonl, write_chunks_jsonl
from .errors import MissingArtifactError, ValidationError
from .graph import (
    QuestionNode,
    build_weighted_graph,
    compute_embeddings,
    export_graph,
    import_graph,
    max_spanning_tree,
    reduce_nodes,
    threshold_filter,
)
from .metrics import classification_report, format_classification_table
from .outline import SectionId, parse_outline
from .pairs import build_pair_dataset, read_pairs_jsonl, write_pairs_jsonl
from .scoring import (
    Backends,
    PairQuery,
    PrecomputedSpecificity,
    ScorerConfig,
    build_backends,
)

STAGES = ("ingest", "pairs", "questions", "score", "build", "export", "eval")

STAGE_REQUIRES: dict[str, tuple[str, ...]] = {
    "ingest": (),
    "pairs": ("ingest",),
    "questions": ("ingest",),
    "score": ("questions",),
    "build": ("questions", "score"),
    "export": ("build",),
    "eval": ("pairs",),
}

STAGE_OUTPUTS: dict[str, tuple[str, ...]] = {
    "ingest": ("outline.json", "chunks.jsonl"),
    "pairs": ("pairs.jsonl", "pairs_stats.json"),
    "questions": ("questions.jsonl",),
    "score": ("embeddings.jsonl", "scores.jsonl"),
    "build": ("graph_complete.json", "graph_tree.json", "threshold_report.json"),
    "export": ("tree.dot", "tree.graphml"),
    "eval": ("eval_classification.json", "eval_classification.txt"),
}

MANIFEST_NAME = "manifest.json"

# configuration keys whose values change a stage's output bytes
_SCORER_CONTENT_KEYS = ("embedder", "classifier", "generator", "endpoint", "scores_path")
_STAGE_CONFIG_KEYS: dict[str, tuple[str, ...]] = {
    "ingest": ("percentile", "max_chars", "scorer"),
    "pairs": ("seed",),
    "questions": ("scorer",),
    "score": ("scorer",),
    "build": ("lambda", "tau", "target_nodes"),
    "export": (),
    "eval": ("scorer",),
}


def fork_seed(seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def node_id_for_chunk(chunk_id: str) -> str:
    if chunk_id.startswith("chk_"):
        return f"q_{chunk_id[4:]}"
    return f"q_{chunk_id}"


@dataclass
class PipelineConfig:
    """Everything a full run needs; see module docstring for stage flow."""

    input_path: str
    output_dir: str
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    lam: float = 0.3
    tau: float = 0.7
    target_nodes: int = 300
    percentile: float = 25.0
    max_chars: int = 2000
    seed: int = 0

    def validate(self) -> "PipelineConfig":
        # the input path is checked by the ingest stage; later stages run
        # from artifacts alone
        if not self.output_dir:
            raise ValidationError("config needs an output directory")
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda out of [0, 1]: {self.lam!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau out of [0, 1]: {self.tau!r}")
        if self.target_nodes < 1:
            raise ValidationError(f"target_nodes must be >= 1, got {self.target_nodes}")
        if not 0.0 <= self.percentile <= 100.0:
            raise ValidationError(f"percentile out of [0, 100]: {self.percentile!r}")
        if self.max_chars < 1:
            raise ValidationError(f"max_chars must be >= 1, got {self.max_chars}")
        self.scorer.validate()
        return self

    def to_dict(self) -> dict:
        return {
            "input": self.input_path,
            "output_dir": self.output_dir,
            "lambda": self.lam,
            "tau": self.tau,
            "target_nodes": self.target_nodes,
            "percentile": self.percentile,
            "max_chars": self.max_chars,
            "seed": self.seed,
            "scorer": self.scorer.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        known = {
            "input", "output_dir", "lambda", "tau", "target_nodes",
            "percentile", "max_chars", "seed", "backend", "scorer", "endpoint",
        }
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        scorer = scorer_bundle(payload.get("backend", "tfidf"))
        for key, value in payload.get("scorer", {}).items():
            if not hasattr(scorer, key):
                raise ValidationError(f"unknown scorer config key: {key!r}")
            setattr(scorer, key, value)
        if payload.get("endpoint"):
            scorer.endpoint = payload["endpoint"]
        config = cls(
            input_path=payload.get("input", ""),
            output_dir=payload.get("output_dir", ""),
            scorer=scorer,
            lam=float(payload.get("lambda", 0.3)),
            tau=float(payload.get("tau", 0.7)),
            target_nodes=int(payload.get("target_nodes", 300)),
            percentile=float(payload.get("percentile", 25.0)),
            max_chars=int(payload.get("max_chars", 2000)),
            seed=int(payload.get("seed", 0)),
        )
        return config

    @classmethod
    def from_file(cls, path: "str | Path") -> "PipelineConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as err:
            raise ValidationError(f"config file not found: {path}") from err
        except json.JSONDecodeError as err:
            raise ValidationError(f"config file does not parse: {err}") from err
        if not isinstance(payload, dict):
            raise ValidationError("config file must contain a JSON object")
        return cls.from_dict(payload)


def scorer_bundle(backend: str) -> ScorerConfig:
    """Map a backend shorthand to a full scorer configuration.

    "tfidf" and "oracle" both select the offline deterministic trio (tf-idf
    embeddings, hierarchy-oracle classifier, template generator); "remote"
    sends all three roles to the HTTP service.
    """
    if backend in ("tfidf", "oracle"):
        return ScorerConfig(embedder="tfidf", classifier="oracle", generator="template")
    if backend == "remote":
        return ScorerConfig(embedder="remote", classifier="remote", generator="remote")
    raise ValidationError(f"unknown backend bundle: {backend!r}")


@dataclass(frozen=True)
class StageResult:
    stage: str
    skipped: bool
    duration_s: float
    outputs: tuple[str, ...]


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, payload: dict) -> None:
    _write_text(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def write_questions_jsonl(path: "str | Path", rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            record = {
                "node_id": row["node_id"],
                "chunk_id": row["chunk_id"],
                "section_id": row["section_id"],
                "question": row["question"],
                "context": row["context"],
                "truncated": row["truncated"],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_questions_jsonl(path: "str | Path") -> list[QuestionNode]:
    nodes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            nodes.append(
                QuestionNode(
                    node_id=record["node_id"],
                    question=record["question"],
                    context=record["context"],
                    chunk_id=record["chunk_id"],
                    section_id=SectionId.parse(record["section_id"]),
                )
            )
    return nodes


def write_embeddings_jsonl(path: "str | Path", nodes: Sequence[QuestionNode]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for node in nodes:
            record = {
                "node_id": node.node_id,
                "vector": [float(x) for x in node.embedding],
            }
            fh.write(json.dumps(record) + "\n")


def read_embeddings_jsonl(path: "str | Path") -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            vectors[record["node_id"]] = np.asarray(record["vector"], dtype=float)
    return vectors


class Pipeline:
    """Runs configured stages against one output directory."""

    def __init__(self, config: PipelineConfig):
        self.config = config.validate()
        self.out = Path(config.output_dir)

    # -- manifest bookkeeping -------------------------------------------------

    def _manifest_path(self) -> Path:
        return self.out / MANIFEST_NAME

    def _load_manifest(self) -> dict:
        path = self._manifest_path()
        if not path.exists():
            return {"version": 1, "stages": {}}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return {"version": 1, "stages": {}}

    def _stage_config_hash(self, stage: str) -> str:
        full = self.config.to_dict()
        slice_: dict = {}
        for key in _STAGE_CONFIG_KEYS[stage]:
            if key == "scorer":
                slice_["scorer"] = {
                    k: full["scorer"][k] for k in _SCORER_CONTENT_KEYS
                }
            else:
                slice_[key] = full[key]
        canonical = json.dumps(slice_, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def _input_hashes(self, stage: str) -> dict[str, str]:
        hashes: dict[str, str] = {}
        if stage == "ingest":
            if not self.config.input_path:
                raise ValidationError("the ingest stage needs an input path")
            source = Path(self.config.input_path)
            if not source.is_file():
                raise ValidationError(f"input file not found: {source}")
            hashes["input"] = _sha256_file(source)
        for upstream in STAGE_REQUIRES[stage]:
            for name in STAGE_OUTPUTS[upstream]:
                hashes[name] = _sha256_file(self.out / name)
        if stage == "score" and self.config.scorer.classifier == "precomputed":
            hashes["scores_path"] = _sha256_file(Path(self.config.scorer.scores_path))
        return hashes

    def _check_upstream(self, stage: str) -> None:
        missing = [
            upstream
            for upstream in STAGE_REQUIRES[stage]
            if any(not (self.out / name).exists() for name in STAGE_OUTPUTS[upstream])
        ]
        if missing:
            raise MissingArtifactError(
                f"stage '{stage}' requires: {', '.join(missing)}"
            )

    def _up_to_date(self, stage: str, manifest: dict, input_hashes: dict) -> bool:
        entry = manifest["stages"].get(stage)
        if entry is None:
            return False
        if entry.get("input_hashes") != input_hashes:
            return False
        if entry.get("config_hash") != self._stage_config_hash(stage):
            return False
        for name, recorded in entry.get("output_hashes", {}).items():
            path = self.out / name
            if not path.exists() or _sha256_file(path) != recorded:
                return False
        return set(entry.get("output_hashes", {})) == set(STAGE_OUTPUTS[stage])

    # -- stage bodies ---------------------------------------------------------

    def _backends(self) -> Backends:
        return build_backends(self.config.scorer)

    def _stage_ingest(self) -> None:
        document = Path(self.config.input_path).read_text(encoding="utf-8")
        outline = parse_outline(document)
        chunks = chunk_sections(
            outline,
            document,
            self._backends().embedder,
            ChunkingConfig(
                percentile=self.config.percentile, max_chars=self.config.max_chars
            ),
        )
        payload = {
            "front_matter": list(outline.front_matter),
            "warnings": list(outline.warnings),
            "sections": [
                {
                    "id": node.id.code,
                    "title": node.title,
                    "parent": node.parent.code if node.parent else None,
                    "char_span": list(node.char_span),
                    "body_span": list(node.body_span),
                    "synthesized": node.synthesized,
                }
                for node in outline.sections
            ],
        }
        _write_json(self.out / "outline.json", payload)
        write_chunks_jsonl(self.out / "chunks.jsonl", chunks)

    def _stage_pairs(self) -> None:
        chunks = read_chunks_jsonl(self.out / "chunks.jsonl")
        seed = fork_seed(self.config.seed, "pairs")
        pairs, stats = build_pair_dataset(chunks, seed)
        write_pairs_jsonl(self.out / "pairs.jsonl", pairs, seed)
        _write_json(self.out / "pairs_stats.json", stats.to_dict())

    def _stage_questions(self) -> None:
        chunks = read_chunks_jsonl(self.out / "chunks.jsonl")
        if not chunks:
            raise ValidationError("no chunks to generate questions from")
        result = self._backends().generator.generate([c.text for c in chunks])
        rows = [
            {
                "node_id": node_id_for_chunk(chunk.chunk_id),
                "chunk_id": chunk.chunk_id,
                "section_id": chunk.section_id.code,
                "question": question,
                "context": chunk.text,
                "truncated": truncated,
            }
            for chunk, question, truncated in zip(
                chunks, result.questions, result.truncated
            )
        ]
        write_questions_jsonl(self.out / "questions.jsonl", rows)

    def _stage_score(self) -> None:
        nodes = read_questions_jsonl(self.out / "questions.jsonl")
        if len(nodes) < 2:
            raise ValidationError(f"scoring needs at least 2 questions, got {len(nodes)}")
        nodes.sort(key=lambda n: n.node_id)
        backends = self._backends()
        compute_embeddings(nodes, backends.embedder)
        write_embeddings_jsonl(self.out / "embeddings.jsonl", nodes)
        queries = [
            PairQuery(
                q_a=a.question,
                c_a=a.context,
                q_b=b.question,
                c_b=b.context,
                id_a=a.node_id,
                id_b=b.node_id,
                section_a=a.section_id,
                section_b=b.section_id,
            )
            for i, a in enumerate(nodes)
            for b in nodes[i + 1 :]
        ]
        distributions = backends.classifier.classify(queries)
        with open(self.out / "scores.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for query, dist in zip(queries, distributions):
                record = {
                    "id_a": query.id_a,
                    "id_b": query.id_b,
                    "general": dist.p_general,
                    "specific": dist.p_specific,
                    "other": dist.p_other,
                }
                fh.write(json.dumps(record) + "\n")

    def _stage_build(self) -> None:
        nodes = read_questions_jsonl(self.out / "questions.jsonl")
        vectors = read_embeddings_jsonl(self.out / "embeddings.jsonl")
        missing = [n.node_id for n in nodes if n.node_id not in vectors]
        if missing:
            raise ValidationError(
                f"embeddings artifact is missing nodes: {missing[:5]}"
            )
        for node in nodes:
            node.embedding = vectors[node.node_id]
        backends = Backends(
            embedder=_ArtifactEmbedder(),
            classifier=PrecomputedSpecificity.from_jsonl(self.out / "scores.jsonl"),
            generator=_ArtifactEmbedder(),
        )
        reduced, merge_log = reduce_nodes(nodes, self.config.target_nodes, backends)
        complete = build_weighted_graph(
            reduced, backends, self.config.lam, merge_log=merge_log
        )
        report = threshold_filter(complete, self.config.tau)
        tree = max_spanning_tree(complete)
        (self.out / "graph_complete.json").write_bytes(export_graph(complete, "json"))
        (self.out / "graph_tree.json").write_bytes(export_graph(tree, "json"))
        _write_json(self.out / "threshold_report.json", report.to_dict())

    def _stage_export(self) -> None:
        tree = import_graph((self.out / "graph_tree.json").read_bytes())
        (self.out / "tree.dot").write_bytes(export_graph(tree, "dot"))
        (self.out / "tree.graphml").write_bytes(export_graph(tree, "graphml"))

    def _stage_eval(self) -> None:
        if self.config.scorer.classifier == "precomputed":
            raise ValidationError(
                "precomputed scores are keyed by question node ids and cannot "
                "label the pair dataset; use the oracle or remote classifier"
            )
        _, pairs = read_pairs_jsonl(self.out / "pairs.jsonl")
        if not pairs:
            raise ValidationError("pair dataset is empty")
        backends = self._backends()
        # the pair dataset predates question generation, so queries carry
        # empty question fields and the contexts do the work
        queries = [
            PairQuery(
                q_a="",
                c_a=pair.context_a,
                q_b="",
                c_b=pair.context_b,
                section_a=pair.section_a,
                section_b=pair.section_b,
            )
            for pair in pairs
        ]
        predicted = [
            dist.argmax_label() for dist in backends.classifier.classify(queries)
        ]
        gold = [pair.label for pair in pairs]
        report = classification_report(gold, predicted)
        _write_json(self.out / "eval_classification.json", report.to_dict())
        _write_text(
            self.out / "eval_classification.txt", format_classification_table(report)
        )

    # -- runner ---------------------------------------------------------------

    def _stage_fn(self, stage: str) -> Callable[[], None]:
        return {
            "ingest": self._stage_ingest,
            "pairs": self._stage_pairs,
            "questions": self._stage_questions,
            "score": self._stage_score,
            "build": self._stage_build,
            "export": self._stage_export,
            "eval": self._stage_eval,
        }[stage]

    def run(
        self, stages: Sequence[str] | None = None, force: bool = False
    ) -> list[StageResult]:
        requested = list(stages) if stages is not None else list(STAGES)
        unknown = sorted(set(requested) - set(STAGES))
        if unknown:
            raise ValidationError(f"unknown stages: {unknown}")
        ordered = [stage for stage in STAGES if stage in requested]
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = self._load_manifest()
        results = []
        for stage in ordered:
            self._check_upstream(stage)
            input_hashes = self._input_hashes(stage)
            if not force and self._up_to_date(stage, manifest, input_hashes):
                results.append(
                    StageResult(
                        stage=stage,
                        skipped=True,
                        duration_s=0.0,
                        outputs=STAGE_OUTPUTS[stage],
                    )
                )
                continue
            started = time.monotonic()
            self._stage_fn(stage)()
            duration = time.monotonic() - started
            output_hashes = {
                name: _sha256_file(self.out / name) for name in STAGE_OUTPUTS[stage]
            }
            manifest["stages"][stage] = {
                "stage": stage,
                "input_hashes": input_hashes,
                "config_hash": self._stage_config_hash(stage),
                "output_hashes": output_hashes,
                "duration_s": duration,
            }
            _write_json(self._manifest_path(), manifest)
            results.append(
                StageResult(
                    stage=stage,
                    skipped=False,
                    duration_s=duration,
                    outputs=STAGE_OUTPUTS[stage],
                )
            )
        return results


class _ArtifactEmbedder:
    """Placeholder backend for stages that must run from artifacts alone."""

    def embed(self, texts):
        raise ValidationError(
            "embeddings artifact does not cover all nodes; rerun the score stage"
        )

    def generate(self, contexts):
        raise ValidationError("question generation is not available at this stage")


def run_pipeline(
    config: PipelineConfig,
    stages: Sequence[str] | None = None,
    force: bool = False,
) -> list[StageResult]:
    return Pipeline(config).run(stages=stages, force=force)
