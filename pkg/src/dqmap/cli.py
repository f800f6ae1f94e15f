"""Command-line entry point.

Subcommands mirror the pipeline stages (ingest, pairs, questions, score,
build, export, eval) plus `run` for a full or partial pass and `path` for
sampling question paths from the pruned tree. Options layer as: config
file, then command-line flags, then the DQM_ENDPOINT environment variable
(which always wins for the service endpoint).

Exit codes: 0 success, 1 validation error, 2 backend error, 3 missing
upstream artifact.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import BackendError, MissingArtifactError, ValidationError
from .graph import format_path, import_graph, sample_path
from .pipeline import (
    STAGES,
    PipelineConfig,
    fork_seed,
    run_pipeline,
    scorer_bundle,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BACKEND = 2
EXIT_MISSING_ARTIFACT = 3


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--input", metavar="PATH", help="input Markdown textbook")
    parser.add_argument("--output-dir", metavar="PATH", help="artifact directory")
    parser.add_argument(
        "--lambda", dest="lam", type=float, metavar="X",
        help="weight mix coefficient in [0, 1] (default 0.3)",
    )
    parser.add_argument(
        "--tau", type=float, metavar="X",
        help="diagnostic weight threshold in [0, 1] (default 0.7)",
    )
    parser.add_argument(
        "--target-nodes", type=int, metavar="N",
        help="question count after the merge loop (default 300)",
    )
    parser.add_argument("--seed", type=int, metavar="N", help="run seed (default 0)")
    parser.add_argument(
        "--backend", choices=("tfidf", "oracle", "remote"),
        help="scorer bundle: offline baselines or the remote service",
    )
    parser.add_argument("--endpoint", metavar="URL", help="remote service URL")
    parser.add_argument(
        "--scores", metavar="PATH",
        help="precomputed specificity scores JSONL (sets the classifier)",
    )
    parser.add_argument(
        "--percentile", type=float, metavar="P",
        help="chunk breakpoint percentile (default 25)",
    )
    parser.add_argument(
        "--max-chars", type=int, metavar="N",
        help="chunk size cap in characters (default 2000)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqmap",
        description="Build domain question maps from Markdown textbooks.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="run the pipeline end to end")
    _add_common_options(run)
    run.add_argument(
        "--stages", metavar="LIST",
        help=f"comma-separated subset of: {', '.join(STAGES)}",
    )
    run.add_argument(
        "--force", action="store_true", help="rerun stages even if up to date"
    )

    for stage in STAGES:
        sub = subparsers.add_parser(stage, help=f"run only the {stage} stage")
        _add_common_options(sub)
        sub.add_argument(
            "--force", action="store_true", help="rerun even if up to date"
        )

    path = subparsers.add_parser(
        "path", help="sample a question path from the pruned tree"
    )
    _add_common_options(path)
    path.add_argument(
        "--length", type=int, default=3, metavar="K",
        help="path length in nodes (default 3)",
    )
    path.add_argument(
        "--json", action="store_true", help="emit the path as JSON steps"
    )
    return parser


def _assemble_config(args: argparse.Namespace) -> PipelineConfig:
    if args.config:
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig(input_path="", output_dir="")
    if args.input:
        config.input_path = args.input
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.lam is not None:
        config.lam = args.lam
    if args.tau is not None:
        config.tau = args.tau
    if args.target_nodes is not None:
        config.target_nodes = args.target_nodes
    if args.seed is not None:
        config.seed = args.seed
    if args.percentile is not None:
        config.percentile = args.percentile
    if args.max_chars is not None:
        config.max_chars = args.max_chars
    if args.backend:
        config.scorer = scorer_bundle(args.backend)
    if args.endpoint:
        config.scorer.endpoint = args.endpoint
    if args.scores:
        config.scorer.classifier = "precomputed"
        config.scorer.scores_path = args.scores
    env_endpoint = os.environ.get("DQM_ENDPOINT")
    if env_endpoint:
        config.scorer.endpoint = env_endpoint
    return config


def _parse_stages(value: str | None) -> list[str] | None:
    if value is None:
        return None
    stages = [item.strip() for item in value.split(",") if item.strip()]
    if not stages:
        raise ValidationError("--stages given but empty")
    return stages


def _print_results(results) -> None:
    for result in results:
        if result.skipped:
            print(f"{result.stage}: skipped (up to date)")
        else:
            files = ", ".join(result.outputs)
            print(f"{result.stage}: ok ({result.duration_s:.2f}s) -> {files}")


def _cmd_run(args: argparse.Namespace) -> int:
    config = _assemble_config(args)
    stages = _parse_stages(getattr(args, "stages", None))
    results = run_pipeline(config, stages=stages, force=args.force)
    _print_results(results)
    return EXIT_OK


def _cmd_stage(args: argparse.Namespace) -> int:
    config = _assemble_config(args)
    results = run_pipeline(config, stages=[args.command], force=args.force)
    _print_results(results)
    return EXIT_OK


def _cmd_path(args: argparse.Namespace) -> int:
    config = _assemble_config(args)
    if not config.output_dir:
        raise ValidationError("path sampling needs --output-dir or a config file")
    tree_path = Path(config.output_dir) / "graph_tree.json"
    if not tree_path.exists():
        raise MissingArtifactError("stage 'path' requires: build")
    tree = import_graph(tree_path.read_bytes())
    seed = args.seed if args.seed is not None else fork_seed(config.seed, "path")
    steps = sample_path(tree, args.length, seed)
    if args.json:
        print(json.dumps([step.to_dict() for step in steps], ensure_ascii=False))
    else:
        print(format_path(steps))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "path":
            return _cmd_path(args)
        return _cmd_stage(args)
    except MissingArtifactError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except BackendError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BACKEND
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
