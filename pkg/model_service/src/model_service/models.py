"""Model wrappers: embedding, pair classification, and question generation.

Each wrapper owns one tokenizer/model pair, batches internally, clips inputs
to the configured context budget, and reports which inputs were clipped.
Inference failures surface as ModelError carrying the model identifier.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterator, Sequence

import torch
import torch.nn.functional as F
from transformers import (
    AutoModel,
    AutoModelForSeq2SeqLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
)

from model_service.config import ServiceConfig

LABELS = ("general", "specific", "other")

# Serialization convention for classifier inputs; the pair fields are joined
# with the tokenizer's separator token in this fixed order.
CLASSIFIER_TEMPLATE = "{q_a} {sep} {c_a} {sep} {q_b} {sep} {c_b}"


class ModelError(RuntimeError):
    """Inference or load failure, attributable to a specific model."""

    def __init__(self, message: str, *, model_id: str, role: str) -> None:
        super().__init__(message)
        self.model_id = model_id
        self.role = role


def build_classifier_input(
    q_a: str, c_a: str, q_b: str, c_b: str, sep: str = "[SEP]"
) -> str:
    """Serialize an ordered question/context pair for the classifier."""
    return CLASSIFIER_TEMPLATE.format(q_a=q_a, c_a=c_a, q_b=q_b, c_b=c_b, sep=sep)


@dataclass
class _Encoded:
    input_ids: torch.Tensor
    attention_mask: torch.Tensor
    truncated: list[bool]


class _ModelWrapper:
    role: str

    def __init__(self, path: str, device: str, batch_size: int) -> None:
        self.model_id = path
        self.device = device
        self.batch_size = batch_size
        # One model instance serves all requests; serialize forward passes.
        self._lock = threading.Lock()
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(path)
            self.model = self._load(path).to(device)
        except ModelError:
            raise
        except Exception as exc:
            raise ModelError(
                f"failed to load {self.role} model from {path!r}: {exc}",
                model_id=path,
                role=self.role,
            ) from exc
        self.model.eval()

    def _load(self, path: str):
        raise NotImplementedError

    def _encode(self, texts: Sequence[str], max_tokens: int) -> _Encoded:
        """Tokenize without truncation, flag over-length inputs, clip, pad."""
        raw = self.tokenizer(list(texts), add_special_tokens=False)["input_ids"]
        truncated = [len(ids) > max_tokens for ids in raw]
        clipped = [ids[:max_tokens] for ids in raw]
        if any(len(ids) == 0 for ids in clipped):
            raise ValueError("input text produced no tokens")
        padded = self.tokenizer.pad({"input_ids": clipped}, return_tensors="pt")
        return _Encoded(
            input_ids=padded["input_ids"].to(self.device),
            attention_mask=padded["attention_mask"].to(self.device),
            truncated=truncated,
        )

    def _batches(self, items: Sequence) -> Iterator[Sequence]:
        for start in range(0, len(items), self.batch_size):
            yield items[start : start + self.batch_size]

    def _fail(self, exc: Exception) -> ModelError:
        return ModelError(
            f"{self.role} model {self.model_id!r} failed: {exc}",
            model_id=self.model_id,
            role=self.role,
        )


class TextEmbedder(_ModelWrapper):
    """Mean-pooled, L2-normalized sentence embeddings."""

    role = "embedder"

    def __init__(self, path: str, device: str, batch_size: int, max_tokens: int) -> None:
        self.max_tokens = max_tokens
        super().__init__(path, device, batch_size)

    def _load(self, path: str):
        return AutoModel.from_pretrained(path)

    def embed(self, texts: Sequence[str]) -> tuple[list[list[float]], list[bool]]:
        vectors: list[list[float]] = []
        truncated: list[bool] = []
        for batch in self._batches(list(texts)):
            enc = self._encode(batch, self.max_tokens)
            try:
                with self._lock, torch.no_grad():
                    hidden = self.model(
                        input_ids=enc.input_ids, attention_mask=enc.attention_mask
                    ).last_hidden_state
            except Exception as exc:
                raise self._fail(exc) from exc
            mask = enc.attention_mask.unsqueeze(-1).to(hidden.dtype)
            summed = (hidden * mask).sum(dim=1)
            counts = mask.sum(dim=1).clamp(min=1.0)
            pooled = F.normalize(summed / counts, p=2, dim=1)
            vectors.extend(pooled.tolist())
            truncated.extend(enc.truncated)
        return vectors, truncated


class SpecificityClassifier(_ModelWrapper):
    """Softmax distribution over (general, specific, other) for ordered pairs."""

    role = "classifier"

    def __init__(self, path: str, device: str, batch_size: int, max_tokens: int) -> None:
        self.max_tokens = max_tokens
        super().__init__(path, device, batch_size)
        id2label = {
            int(k): str(v).lower()
            for k, v in getattr(self.model.config, "id2label", {}).items()
        }
        if sorted(id2label.values()) != sorted(LABELS):
            raise ModelError(
                f"classifier checkpoint {path!r} must declare id2label over {LABELS}",
                model_id=path,
                role=self.role,
            )
        self._label_order = [id2label[i] for i in range(len(LABELS))]

    def _load(self, path: str):
        return AutoModelForSequenceClassification.from_pretrained(path)

    def classify(
        self, pairs: Sequence[tuple[str, str, str, str]]
    ) -> tuple[list[dict[str, float]], list[bool]]:
        sep = self.tokenizer.sep_token or "[SEP]"
        texts = [build_classifier_input(*pair, sep=sep) for pair in pairs]
        distributions: list[dict[str, float]] = []
        truncated: list[bool] = []
        for batch in self._batches(texts):
            enc = self._encode(batch, self.max_tokens)
            try:
                with self._lock, torch.no_grad():
                    logits = self.model(
                        input_ids=enc.input_ids, attention_mask=enc.attention_mask
                    ).logits
            except Exception as exc:
                raise self._fail(exc) from exc
            probs = torch.softmax(logits, dim=-1).tolist()
            for row in probs:
                distributions.append(dict(zip(self._label_order, row)))
            truncated.extend(enc.truncated)
        return distributions, truncated


class QuestionGenerator(_ModelWrapper):
    """Greedy seq2seq question generation with deterministic decoding."""

    role = "generator"

    def __init__(
        self,
        path: str,
        device: str,
        batch_size: int,
        max_context_tokens: int,
        max_question_tokens: int,
    ) -> None:
        self.max_context_tokens = max_context_tokens
        self.max_question_tokens = max_question_tokens
        super().__init__(path, device, batch_size)
        blocked = {
            self.tokenizer.pad_token_id,
            self.tokenizer.unk_token_id,
            self.tokenizer.sep_token_id,
        }
        blocked.discard(None)
        blocked.discard(self.tokenizer.eos_token_id)
        self._bad_words = [[token_id] for token_id in sorted(blocked)]

    def _load(self, path: str):
        return AutoModelForSeq2SeqLM.from_pretrained(path)

    def generate(self, contexts: Sequence[str]) -> tuple[list[str], list[bool]]:
        questions: list[str] = []
        truncated: list[bool] = []
        for batch in self._batches(list(contexts)):
            enc = self._encode(batch, self.max_context_tokens)
            try:
                with self._lock, torch.no_grad():
                    outputs = self.model.generate(
                        enc.input_ids,
                        attention_mask=enc.attention_mask,
                        max_new_tokens=self.max_question_tokens,
                        min_new_tokens=3,
                        do_sample=False,
                        num_beams=1,
                        bad_words_ids=self._bad_words or None,
                    )
            except Exception as exc:
                raise self._fail(exc) from exc
            decoded = self.tokenizer.batch_decode(outputs, skip_special_tokens=True)
            for text in decoded:
                questions.append(self._polish(text))
            truncated.extend(enc.truncated)
        return questions, truncated

    def _polish(self, raw: str) -> str:
        text = " ".join(raw.split()).strip(" .!,;:?")
        if not text:
            raise self._fail(RuntimeError("decoded an empty question"))
        text = text + "?"
        return text[0].upper() + text[1:]


@dataclass
class LoadedModels:
    """The three single-instance models the service shares across requests."""

    generator: QuestionGenerator
    classifier: SpecificityClassifier
    embedder: TextEmbedder


def load_models(config: ServiceConfig) -> LoadedModels:
    """Load every role up front so startup fails fast on a bad checkpoint."""
    generator = QuestionGenerator(
        config.generator_model,
        config.device,
        config.batch_size,
        max_context_tokens=config.max_context_tokens,
        max_question_tokens=config.max_question_tokens,
    )
    classifier = SpecificityClassifier(
        config.classifier_model,
        config.device,
        config.batch_size,
        max_tokens=config.max_context_tokens,
    )
    embedder = TextEmbedder(
        config.embedder_model,
        config.device,
        config.batch_size,
        max_tokens=config.max_context_tokens,
    )
    return LoadedModels(generator=generator, classifier=classifier, embedder=embedder)
