"""Service configuration: model identifiers, token limits, and the listen port."""

from __future__ import annotations

import json
import os
from dataclasses import MISSING, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "MODEL_SERVICE_"

_INT_FIELDS = frozenset(
    {"max_context_tokens", "max_question_tokens", "port", "batch_size"}
)


class ConfigError(ValueError):
    """Raised when a configuration value is missing or out of range."""


@dataclass(frozen=True)
class ServiceConfig:
    """Everything needed to load the three models and serve them.

    Model fields accept either a local checkpoint directory or a hub
    identifier; they are resolved with the transformers Auto* loaders.
    """

    generator_model: str
    classifier_model: str
    embedder_model: str
    device: str = "cpu"
    max_context_tokens: int = 768
    max_question_tokens: int = 256
    port: int = 8080
    batch_size: int = 16

    def __post_init__(self) -> None:
        for role in ("generator_model", "classifier_model", "embedder_model"):
            value = getattr(self, role)
            if not isinstance(value, str) or not value.strip():
                raise ConfigError(f"{role} must be a non-empty model identifier")
        if not isinstance(self.device, str) or not self.device.strip():
            raise ConfigError("device must be a non-empty string")
        if self.max_context_tokens <= 0:
            raise ConfigError("max_context_tokens must be positive")
        if self.max_question_tokens <= 0:
            raise ConfigError("max_question_tokens must be positive")
        if not 0 < self.port < 65536:
            raise ConfigError("port must be in 1..65535")
        if self.batch_size <= 0:
            raise ConfigError("batch_size must be positive")

    @property
    def model_ids(self) -> dict[str, str]:
        """Role -> identifier mapping, as reported by the health endpoint."""
        return {
            "generator": self.generator_model,
            "classifier": self.classifier_model,
            "embedder": self.embedder_model,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ServiceConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        missing = sorted(
            f.name
            for f in fields(cls)
            if f.default is MISSING and f.name not in payload
        )
        if missing:
            raise ConfigError(f"missing configuration keys: {', '.join(missing)}")
        return cls(**dict(payload))

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        source = Path(path)
        if not source.is_file():
            raise ConfigError(f"configuration file not found: {source}")
        try:
            payload = json.loads(source.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration file is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError("configuration file must hold a JSON object")
        return cls.from_dict(payload)


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    **overrides: Any,
) -> ServiceConfig:
    """Assemble a config from file, then MODEL_SERVICE_* environment, then overrides.

    Later sources win. Environment keys are the upper-cased field names with
    the MODEL_SERVICE_ prefix, e.g. MODEL_SERVICE_PORT or
    MODEL_SERVICE_EMBEDDER_MODEL.
    """
    merged: dict[str, Any] = {}
    if path is not None:
        base = ServiceConfig.from_file(path)
        merged.update({f.name: getattr(base, f.name) for f in fields(ServiceConfig)})
    env_map = os.environ if env is None else env
    for field in fields(ServiceConfig):
        raw = env_map.get(ENV_PREFIX + field.name.upper())
        if raw is None:
            continue
        if field.name in _INT_FIELDS:
            try:
                merged[field.name] = int(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{ENV_PREFIX + field.name.upper()} must be an integer, got {raw!r}"
                ) from exc
        else:
            merged[field.name] = raw
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ServiceConfig.from_dict(merged)
