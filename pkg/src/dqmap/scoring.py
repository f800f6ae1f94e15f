"""Scorer backends: embeddings, specificity classification, question generation.

Three scores flow out of this module. A specificity classifier maps an
ordered pair of questions-with-contexts to a distribution over
{general, specific, other}; its confidence score is
``eta = 1 - p_other``. Semantic similarity ``xi`` is the cosine of the
embedded ``question + " " + context`` concatenations, clamped to [0, 1] so
that it is commensurate with eta in the edge-weight mix.

Offline baselines (tf-idf embeddings, hierarchy oracle, template question
generator) keep the pipeline fully deterministic; the remote backend speaks
the HTTP wire protocol:

    POST /v1/embed        {"texts": [str]}      -> {"vectors": [[number]]}
    POST /v1/specificity  {"pairs": [{"q_a", "c_a", "q_b", "c_b"}]}
                                                -> {"distributions":
                                                    [{"general", "specific", "other"}]}
    POST /v1/generate     {"contexts": [str]}   -> {"questions": [str]}
    GET  /health                                -> {"status": "ok", "model_ids": {...}}

Precomputed mode reads per-pair scores from JSONL files keyed by
(id_a, id_b).
"""

from __future__ import annotations

import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np
import requests

from .errors import BackendError, ValidationError
from .outline import (
    LABEL_GENERAL,
    LABEL_OTHER,
    LABEL_SPECIFIC,
    LABELS,
    SectionId,
    section_relationship,
)

_TOKEN_RE = re.compile(r"\w+")

TEMPLATE_QUESTION_WORDS = 8


@dataclass(frozen=True)
class SpecificityDistribution:
    """Softmax output of the specificity classifier."""

    p_general: float
    p_specific: float
    p_other: float

    def validate(self, tol: float = 1e-6) -> "SpecificityDistribution":
        probs = (self.p_general, self.p_specific, self.p_other)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValidationError(f"probabilities out of [0, 1]: {probs}")
        if abs(sum(probs) - 1.0) > tol:
            raise ValidationError(f"probabilities sum to {sum(probs)!r}, not 1: {probs}")
        return self

    def argmax_label(self) -> str:
        # exact ties resolve in label order: general, specific, other
        best = max((LABEL_GENERAL, LABEL_SPECIFIC, LABEL_OTHER), key=self.prob)
        return best

    def prob(self, label: str) -> float:
        return {
            LABEL_GENERAL: self.p_general,
            LABEL_SPECIFIC: self.p_specific,
            LABEL_OTHER: self.p_other,
        }[label]

    def to_dict(self) -> dict:
        return {
            "general": self.p_general,
            "specific": self.p_specific,
            "other": self.p_other,
        }

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float], tol: float = 1e-3
                     ) -> "SpecificityDistribution":
        missing = [k for k in LABELS if k not in mapping]
        if missing:
            raise ValidationError(f"distribution missing classes: {missing}")
        dist = cls(
            p_general=float(mapping["general"]),
            p_specific=float(mapping["specific"]),
            p_other=float(mapping["other"]),
        )
        return dist.validate(tol=tol)


def specificity_confidence(dist: SpecificityDistribution) -> float:
    """Confidence that some hierarchy relation exists: 1 - p_other."""
    dist.validate()
    return 1.0 - dist.p_other


@dataclass(frozen=True)
class PairQuery:
    """An ordered pair of questions with their source contexts.

    ``id_*`` and ``section_*`` are optional metadata used by the oracle and
    precomputed backends; text-only backends ignore them.
    """

    q_a: str
    c_a: str
    q_b: str
    c_b: str
    id_a: str | None = None
    id_b: str | None = None
    section_a: SectionId | None = None
    section_b: SectionId | None = None


class EmbeddingBackend(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class SpecificityBackend(Protocol):
    def classify(self, pairs: Sequence[PairQuery]) -> list[SpecificityDistribution]: ...


@dataclass
class GenerationResult:
    questions: list[str]
    truncated: list[bool]


class GenerationBackend(Protocol):
    def generate(self, contexts: Sequence[str]) -> GenerationResult: ...


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("cosine similarity is undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def question_similarity(
    q_i: str, c_i: str, q_j: str, c_j: str, backend: EmbeddingBackend
) -> float:
    """Cosine of the embedded "q c" concatenations, clamped into [0, 1]."""
    vectors = np.asarray(backend.embed([f"{q_i} {c_i}", f"{q_j} {c_j}"]), dtype=float)
    return clamp_similarity(cosine_similarity(vectors[0], vectors[1]))


def clamp_similarity(value: float) -> float:
    return min(1.0, max(0.0, float(value)))


def classify_specificity(
    q_i: str, c_i: str, q_j: str, c_j: str, backend: SpecificityBackend
) -> SpecificityDistribution:
    return backend.classify([PairQuery(q_a=q_i, c_a=c_i, q_b=q_j, c_b=c_j)])[0]


def generate_question(context: str, backend: GenerationBackend) -> str:
    return backend.generate([context]).questions[0]


class TfidfEmbedder:
    """Deterministic tf-idf embedding baseline.

    The vocabulary (lowercased word unigrams) and document frequencies are
    fitted once, either explicitly via :meth:`fit` or lazily on the first
    :meth:`embed` call, which treats that batch as the corpus. Weights use
    idf = ln((1 + N) / (1 + df)) + 1 and vectors are L2-normalized.
    """

    def __init__(self) -> None:
        self._vocab: dict[str, int] | None = None
        self._idf: np.ndarray | None = None

    @staticmethod
    def _tokens(text: str) -> list[str]:
        return _TOKEN_RE.findall(text.lower())

    @property
    def fitted(self) -> bool:
        return self._vocab is not None

    @property
    def dim(self) -> int:
        if self._vocab is None:
            raise ValidationError("tf-idf embedder is not fitted yet")
        return len(self._vocab)

    def fit(self, corpus: Sequence[str]) -> "TfidfEmbedder":
        if not corpus:
            raise ValidationError("cannot fit tf-idf on an empty corpus")
        df: dict[str, int] = {}
        for text in corpus:
            for token in set(self._tokens(text)):
                df[token] = df.get(token, 0) + 1
        if not df:
            raise ValidationError("corpus contains no word tokens")
        vocab = {token: i for i, token in enumerate(sorted(df))}
        n_docs = len(corpus)
        idf = np.empty(len(vocab))
        for token, col in vocab.items():
            idf[col] = np.log((1.0 + n_docs) / (1.0 + df[token])) + 1.0
        self._vocab, self._idf = vocab, idf
        return self

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValidationError("embed() called with no texts")
        if self._vocab is None:
            self.fit(texts)
        assert self._vocab is not None and self._idf is not None
        out = np.zeros((len(texts), len(self._vocab)))
        for row, text in enumerate(texts):
            if not text.strip():
                raise ValidationError(f"cannot embed empty text (index {row})")
            for token in self._tokens(text):
                col = self._vocab.get(token)
                if col is not None:
                    out[row, col] += 1.0
            out[row] *= self._idf
            norm = np.linalg.norm(out[row])
            if norm == 0.0:
                raise ValidationError(
                    f"text {row} has no in-vocabulary tokens (zero vector): "
                    f"{text[:60]!r}"
                )
            out[row] /= norm
        return out


class HierarchyOracleClassifier:
    """Test-only classifier that reads the answer off the section hierarchy.

    Returns 0.98 on the true class and 0.01 on the other two. Section
    metadata comes from the query itself or, as a fallback, from a
    context-text to section map supplied at construction.
    """

    def __init__(self, section_by_context: Mapping[str, SectionId] | None = None):
        self._by_context = dict(section_by_context or {})

    def _section_of(self, query: PairQuery, side: str) -> SectionId:
        section = query.section_a if side == "a" else query.section_b
        if section is None:
            section = self._by_context.get(query.c_a if side == "a" else query.c_b)
        if section is None:
            raise BackendError(
                "hierarchy oracle requires section metadata for both contexts"
            )
        return section

    def classify(self, pairs: Sequence[PairQuery]) -> list[SpecificityDistribution]:
        out = []
        for query in pairs:
            rel = section_relationship(
                self._section_of(query, "a"), self._section_of(query, "b")
            )
            probs = {label: 0.01 for label in LABELS}
            probs[rel] = 0.98
            out.append(SpecificityDistribution(
                p_general=probs[LABEL_GENERAL],
                p_specific=probs[LABEL_SPECIFIC],
                p_other=probs[LABEL_OTHER],
            ))
        return out


class TemplateQuestionGenerator:
    """Deterministic question stub for pipeline tests.

    Produces "What does the following describe: <first K words>?" where the
    words are the context's tokens with punctuation stripped.
    """

    def __init__(self, k: int = TEMPLATE_QUESTION_WORDS):
        self.k = k

    def generate(self, contexts: Sequence[str]) -> GenerationResult:
        questions = []
        for context in contexts:
            words = _TOKEN_RE.findall(context)
            if not words:
                raise ValidationError(f"cannot generate a question from {context[:60]!r}")
            lead = " ".join(words[: self.k])
            questions.append(f"What does the following describe: {lead}?")
        return GenerationResult(questions=questions, truncated=[False] * len(contexts))


@dataclass
class ScorerConfig:
    """Backend selection for the three scorer roles.

    ``embedder`` is one of {tfidf, remote}; ``classifier`` one of
    {oracle, remote, precomputed}; ``generator`` one of {template, remote}.
    """

    embedder: str = "tfidf"
    classifier: str = "oracle"
    generator: str = "template"
    endpoint: str | None = None
    batch_size: int = 16
    timeout: float = 30.0
    max_in_flight: int = 4
    retries: int = 2
    backoff: float = 0.5
    scores_path: str | None = None

    def validate(self) -> "ScorerConfig":
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        remote_roles = [
            role
            for role, kind in (
                ("embedder", self.embedder),
                ("classifier", self.classifier),
                ("generator", self.generator),
            )
            if kind == "remote"
        ]
        if remote_roles and not self.endpoint:
            raise ValidationError(
                f"remote backend for {remote_roles} requires an endpoint URL"
            )
        if self.classifier == "precomputed" and not self.scores_path:
            raise ValidationError("precomputed classifier requires scores_path")
        return self

    def to_dict(self) -> dict:
        return {
            "embedder": self.embedder,
            "classifier": self.classifier,
            "generator": self.generator,
            "endpoint": self.endpoint,
            "batch_size": self.batch_size,
            "timeout": self.timeout,
            "max_in_flight": self.max_in_flight,
            "retries": self.retries,
            "backoff": self.backoff,
            "scores_path": self.scores_path,
        }


class RemoteScorer:
    """HTTP client for the scorer wire protocol.

    Requests are batched (``batch_size``) and issued with at most
    ``max_in_flight`` concurrent calls; transient failures are retried
    ``retries`` times with exponential backoff. Results are reassembled by
    batch index, so completion order never affects output order.
    """

    def __init__(self, config: ScorerConfig):
        if not config.endpoint:
            raise ValidationError("remote scorer requires an endpoint URL")
        self.config = config
        self.endpoint = config.endpoint.rstrip("/")
        self._session = requests.Session()
        self._embed_cache: dict[str, np.ndarray] = {}

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.endpoint}{path}"
        attempts = self.config.retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                if method == "GET":
                    response = self._session.get(url, timeout=self.config.timeout)
                else:
                    response = self._session.post(
                        url, json=payload, timeout=self.config.timeout
                    )
                if response.status_code >= 500:
                    raise requests.HTTPError(f"HTTP {response.status_code}")
                if response.status_code >= 400:
                    raise BackendError(
                        f"{method} {url} rejected with HTTP {response.status_code}: "
                        f"{response.text[:200]}"
                    )
                return response.json()
            except BackendError:
                raise
            except (requests.RequestException, ValueError) as err:
                last_error = err
                if attempt + 1 < attempts:
                    time.sleep(self.config.backoff * (2 ** attempt))
        raise BackendError(
            f"{method} {url} failed after {attempts} attempts: {last_error}"
        )

    def _batches(self, items: Sequence, size: int) -> list[Sequence]:
        return [items[i : i + size] for i in range(0, len(items), size)]

    def _run_batched(self, batches: list, call) -> list:
        if len(batches) <= 1:
            return [call(batch) for batch in batches]
        with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
            return list(pool.map(call, batches))

    def health(self) -> dict:
        return self._request("GET", "/health")

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValidationError("embed() called with no texts")
        for i, text in enumerate(texts):
            if not text.strip():
                raise ValidationError(f"cannot embed empty text (index {i})")
        missing = [t for t in dict.fromkeys(texts) if t not in self._embed_cache]

        def call(batch: Sequence[str]) -> list[np.ndarray]:
            body = self._request("POST", "/v1/embed", {"texts": list(batch)})
            vectors = body.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise BackendError(
                    f"/v1/embed returned {len(vectors or [])} vectors for "
                    f"{len(batch)} texts"
                )
            out = []
            for vec in vectors:
                arr = np.asarray(vec, dtype=float)
                if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                    raise BackendError("/v1/embed returned a non-finite vector")
                norm = float(np.linalg.norm(arr))
                if norm == 0.0:
                    raise BackendError("/v1/embed returned a zero vector")
                out.append(arr / norm)
            return out

        if missing:
            results = self._run_batched(
                self._batches(missing, self.config.batch_size), call
            )
            for batch, vectors in zip(
                self._batches(missing, self.config.batch_size), results
            ):
                for text, vector in zip(batch, vectors):
                    self._embed_cache[text] = vector
        return np.stack([self._embed_cache[t] for t in texts])

    def classify(self, pairs: Sequence[PairQuery]) -> list[SpecificityDistribution]:
        if not pairs:
            return []

        def call(batch: Sequence[PairQuery]) -> list[SpecificityDistribution]:
            payload = {
                "pairs": [
                    {"q_a": p.q_a, "c_a": p.c_a, "q_b": p.q_b, "c_b": p.c_b}
                    for p in batch
                ]
            }
            try:
                body = self._request("POST", "/v1/specificity", payload)
            except BackendError as err:
                first = batch[0]
                raise BackendError(
                    f"specificity scoring failed on batch starting at pair "
                    f"({first.id_a or first.q_a[:30]!r}, "
                    f"{first.id_b or first.q_b[:30]!r}): {err}"
                ) from err
            dists = body.get("distributions")
            if not isinstance(dists, list) or len(dists) != len(batch):
                raise BackendError(
                    f"/v1/specificity returned {len(dists or [])} distributions "
                    f"for {len(batch)} pairs"
                )
            return [SpecificityDistribution.from_mapping(d) for d in dists]

        results = self._run_batched(
            self._batches(list(pairs), self.config.batch_size), call
        )
        return [dist for batch in results for dist in batch]

    def generate(self, contexts: Sequence[str]) -> GenerationResult:
        if not contexts:
            return GenerationResult(questions=[], truncated=[])

        def call(batch: Sequence[str]) -> GenerationResult:
            body = self._request("POST", "/v1/generate", {"contexts": list(batch)})
            questions = body.get("questions")
            if not isinstance(questions, list) or len(questions) != len(batch):
                raise BackendError(
                    f"/v1/generate returned {len(questions or [])} questions for "
                    f"{len(batch)} contexts"
                )
            for q in questions:
                if not isinstance(q, str) or not q.strip():
                    raise BackendError("/v1/generate returned an empty question")
            truncated = body.get("truncated")
            if not isinstance(truncated, list) or len(truncated) != len(batch):
                truncated = [False] * len(batch)
            return GenerationResult(
                questions=list(questions), truncated=[bool(t) for t in truncated]
            )

        results = self._run_batched(
            self._batches(list(contexts), self.config.batch_size), call
        )
        return GenerationResult(
            questions=[q for r in results for q in r.questions],
            truncated=[t for r in results for t in r.truncated],
        )


class PrecomputedSpecificity:
    """Distributions read from a JSONL file keyed by (id_a, id_b).

    Records look like {"id_a": ..., "id_b": ..., "general": ...,
    "specific": ..., "other": ...}. A reversed lookup swaps the general and
    specific probabilities.
    """

    def __init__(self, scores: Mapping[tuple[str, str], SpecificityDistribution]):
        self._scores = dict(scores)

    @classmethod
    def from_jsonl(cls, path: "str | Path") -> "PrecomputedSpecificity":
        scores: dict[tuple[str, str], SpecificityDistribution] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                scores[(record["id_a"], record["id_b"])] = (
                    SpecificityDistribution.from_mapping(record)
                )
        return cls(scores)

    def classify(self, pairs: Sequence[PairQuery]) -> list[SpecificityDistribution]:
        out = []
        for query in pairs:
            if query.id_a is None or query.id_b is None:
                raise BackendError("precomputed scores require pair ids")
            dist = self._scores.get((query.id_a, query.id_b))
            if dist is None:
                reverse = self._scores.get((query.id_b, query.id_a))
                if reverse is not None:
                    dist = SpecificityDistribution(
                        p_general=reverse.p_specific,
                        p_specific=reverse.p_general,
                        p_other=reverse.p_other,
                    )
            if dist is None:
                raise BackendError(
                    f"no precomputed score for pair ({query.id_a}, {query.id_b})"
                )
            out.append(dist)
        return out


@dataclass
class Backends:
    """The three scorer roles a pipeline run needs."""

    embedder: EmbeddingBackend
    classifier: SpecificityBackend
    generator: GenerationBackend
    remote: RemoteScorer | None = None


def build_backends(
    config: ScorerConfig,
    section_by_context: Mapping[str, SectionId] | None = None,
) -> Backends:
    """Instantiate backends from configuration; shares one remote client."""
    config.validate()
    remote: RemoteScorer | None = None

    def get_remote() -> RemoteScorer:
        nonlocal remote
        if remote is None:
            remote = RemoteScorer(config)
        return remote

    if config.embedder == "tfidf":
        embedder: EmbeddingBackend = TfidfEmbedder()
    elif config.embedder == "remote":
        embedder = get_remote()
    else:
        raise ValidationError(f"unknown embedder backend: {config.embedder!r}")

    if config.classifier == "oracle":
        classifier: SpecificityBackend = HierarchyOracleClassifier(section_by_context)
    elif config.classifier == "remote":
        classifier = get_remote()
    elif config.classifier == "precomputed":
        classifier = PrecomputedSpecificity.from_jsonl(config.scores_path)
    else:
        raise ValidationError(f"unknown classifier backend: {config.classifier!r}")

    if config.generator == "template":
        generator: GenerationBackend = TemplateQuestionGenerator()
    elif config.generator == "remote":
        generator = get_remote()
    else:
        raise ValidationError(f"unknown generator backend: {config.generator!r}")

    return Backends(
        embedder=embedder, classifier=classifier, generator=generator, remote=remote
    )
