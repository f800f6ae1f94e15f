"""HTTP inference service for question mapping backends.

Serves three transformer models behind a small JSON protocol:

    POST /v1/embed        {"texts": [str]}      -> {"vectors": [[number]], "truncated": [bool]}
    POST /v1/specificity  {"pairs": [{"q_a", "c_a", "q_b", "c_b"}]}
                                                -> {"distributions": [{"general", "specific", "other"}],
                                                    "truncated": [bool]}
    POST /v1/generate     {"contexts": [str]}   -> {"questions": [str], "truncated": [bool]}
    GET  /health                                -> {"status": "ok", "model_ids": {...}}
"""

from model_service.config import ServiceConfig, load_config
from model_service.models import (
    LoadedModels,
    ModelError,
    QuestionGenerator,
    SpecificityClassifier,
    TextEmbedder,
    build_classifier_input,
    load_models,
)
from model_service.app import create_app, serve

__all__ = [
    "LoadedModels",
    "ModelError",
    "QuestionGenerator",
    "ServiceConfig",
    "SpecificityClassifier",
    "TextEmbedder",
    "build_classifier_input",
    "create_app",
    "load_config",
    "load_models",
    "serve",
]
