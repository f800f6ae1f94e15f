"""Domain question maps from Markdown textbooks.

The package turns a sectioned textbook into a connected, acyclic, directed
graph of questions: parse the section outline, chunk each section into
coherent contexts, generate one question per chunk, merge near-duplicates
keeping the more general question, score every remaining pair, and prune
the complete weighted graph to its maximum spanning tree.
"""

from .chunking import Chunk, ChunkingConfig, chunk_sections, read_chunks_jsonl, write_chunks_jsonl
from .errors import BackendError, DQMError, MissingArtifactError, ValidationError
from .graph import (
    DIRECTION_A_TO_B,
    DIRECTION_B_TO_A,
    DIRECTION_UNDIRECTED,
    MergeEvent,
    PathStep,
    QuestionGraph,
    QuestionNode,
    ThresholdReport,
    WeightedEdge,
    build_weighted_graph,
    compute_embeddings,
    edge_weight,
    export_graph,
    format_path,
    graph_from_dict,
    graph_to_dict,
    import_graph,
    max_spanning_tree,
    reduce_nodes,
    sample_path,
    threshold_filter,
)
from .metrics import (
    MetricReport,
    RougeScore,
    bleu,
    classification_report,
    corpus_bleu,
    format_classification_table,
    generation_report,
    rouge_l,
)
from .outline import (
    LABEL_GENERAL,
    LABEL_OTHER,
    LABEL_SPECIFIC,
    LABELS,
    Outline,
    SectionId,
    SectionNode,
    parse_outline,
    section_id_codec,
    section_relationship,
)
from .pairs import (
    PairDatasetStats,
    PairExample,
    build_pair_dataset,
    dataset_stats,
    read_pairs_jsonl,
    split_pairs,
    write_pairs_jsonl,
)
from .pipeline import PipelineConfig, StageResult, fork_seed, run_pipeline, scorer_bundle
from .scoring import (
    Backends,
    HierarchyOracleClassifier,
    PairQuery,
    PrecomputedSpecificity,
    RemoteScorer,
    ScorerConfig,
    SpecificityDistribution,
    TemplateQuestionGenerator,
    TfidfEmbedder,
    build_backends,
    clamp_similarity,
    classify_specificity,
    cosine_similarity,
    generate_question,
    question_similarity,
    specificity_confidence,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "Backends",
    "Chunk",
    "ChunkingConfig",
    "DIRECTION_A_TO_B",
    "DIRECTION_B_TO_A",
    "DIRECTION_UNDIRECTED",
    "DQMError",
    "HierarchyOracleClassifier",
    "LABELS",
    "LABEL_GENERAL",
    "LABEL_OTHER",
    "LABEL_SPECIFIC",
    "MergeEvent",
    "MetricReport",
    "MissingArtifactError",
    "Outline",
    "PairDatasetStats",
    "PairExample",
    "PairQuery",
    "PathStep",
    "PipelineConfig",
    "PrecomputedSpecificity",
    "QuestionGraph",
    "QuestionNode",
    "RemoteScorer",
    "RougeScore",
    "ScorerConfig",
    "SectionId",
    "SectionNode",
    "SpecificityDistribution",
    "StageResult",
    "TemplateQuestionGenerator",
    "TfidfEmbedder",
    "ThresholdReport",
    "ValidationError",
    "WeightedEdge",
    "bleu",
    "build_backends",
    "build_pair_dataset",
    "build_weighted_graph",
    "chunk_sections",
    "classification_report",
    "clamp_similarity",
    "classify_specificity",
    "compute_embeddings",
    "corpus_bleu",
    "cosine_similarity",
    "dataset_stats",
    "edge_weight",
    "export_graph",
    "fork_seed",
    "format_classification_table",
    "format_path",
    "generate_question",
    "generation_report",
    "graph_from_dict",
    "graph_to_dict",
    "import_graph",
    "max_spanning_tree",
    "parse_outline",
    "read_chunks_jsonl",
    "read_pairs_jsonl",
    "reduce_nodes",
    "rouge_l",
    "run_pipeline",
    "sample_path",
    "scorer_bundle",
    "section_id_codec",
    "section_relationship",
    "specificity_confidence",
    "split_pairs",
    "threshold_filter",
    "write_chunks_jsonl",
    "write_pairs_jsonl",
]
