"""Untrained evaluation metrics: BLEU, ROUGE-L, and classification scores.

All text metrics tokenize the same way: lowercase, split at whitespace and
punctuation (word characters only). BLEU uses add-one smoothing on the
n >= 2 precisions by default because single-sentence BLEU degenerates to
zero otherwise; unigram precision is never smoothed, so disjoint texts
still score 0. Both choices are recorded in report metadata so scores are
comparable across runs.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ValidationError
from .outline import LABELS

_WORD_RE = re.compile(r"\w+")

TOKENIZER_ID = "lowercase-word-split"
BLEU_SMOOTHING_ID = "add-one-numerator-denominator-n>=2"

ROUGE_BETA = 1.2
BLEU_MAX_N = 4


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(cand_len: int, ref_lens: Sequence[int]) -> int:
    # ties go to the shorter reference
    return min(ref_lens, key=lambda r: (abs(r - cand_len), r))


def _bleu_from_stats(
    matched: list[int],
    totals: list[int],
    cand_len: int,
    ref_len: int,
    smooth: bool,
) -> float:
    log_sum = 0.0
    for n, (m, t) in enumerate(zip(matched, totals), start=1):
        if smooth and n >= 2:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_sum += math.log(m / t)
    precision_mean = math.exp(log_sum / len(matched))
    if cand_len == 0:
        return 0.0
    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * precision_mean


def _bleu_stats(
    candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int
) -> tuple[list[int], list[int]]:
    matched, totals = [], []
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(candidate, n)
        max_ref: Counter = Counter()
        for ref in references:
            for ngram, count in _ngram_counts(ref, n).items():
                if count > max_ref[ngram]:
                    max_ref[ngram] = count
        matched.append(sum(min(c, max_ref[g]) for g, c in cand_counts.items()))
        totals.append(max(len(candidate) - n + 1, 0))
    return matched, totals


def bleu(
    candidate: str,
    references: Sequence[str],
    max_n: int = BLEU_MAX_N,
    smooth: bool = True,
) -> float:
    """Clipped n-gram precision geometric mean times brevity penalty."""
    if not references:
        raise ValidationError("bleu requires at least one reference")
    cand_tokens = tokenize(candidate)
    ref_tokens = [tokenize(ref) for ref in references]
    if not cand_tokens:
        warnings.warn("bleu: empty candidate scores 0", stacklevel=2)
        return 0.0
    if all(not ref for ref in ref_tokens):
        warnings.warn("bleu: all references empty, scoring 0", stacklevel=2)
        return 0.0
    matched, totals = _bleu_stats(cand_tokens, ref_tokens, max_n)
    ref_len = _closest_ref_length(len(cand_tokens), [len(r) for r in ref_tokens])
    return _bleu_from_stats(matched, totals, len(cand_tokens), ref_len, smooth)


def corpus_bleu(
    candidates: Sequence[str],
    references: Sequence[Sequence[str]],
    max_n: int = BLEU_MAX_N,
    smooth: bool = True,
) -> float:
    """BLEU over pooled n-gram statistics, the usual corpus-level form."""
    if len(candidates) != len(references):
        raise ValidationError(
            f"{len(candidates)} candidates vs {len(references)} reference lists"
        )
    if not candidates:
        raise ValidationError("corpus_bleu requires at least one candidate")
    matched = [0] * max_n
    totals = [0] * max_n
    cand_len_sum = 0
    ref_len_sum = 0
    for candidate, refs in zip(candidates, references):
        if not refs:
            raise ValidationError("every candidate needs at least one reference")
        cand_tokens = tokenize(candidate)
        ref_tokens = [tokenize(ref) for ref in refs]
        if not cand_tokens:
            warnings.warn("corpus_bleu: empty candidate contributes 0", stacklevel=2)
            continue
        m, t = _bleu_stats(cand_tokens, ref_tokens, max_n)
        matched = [a + b for a, b in zip(matched, m)]
        totals = [a + b for a, b in zip(totals, t)]
        cand_len_sum += len(cand_tokens)
        ref_len_sum += _closest_ref_length(
            len(cand_tokens), [len(r) for r in ref_tokens]
        )
    return _bleu_from_stats(matched, totals, cand_len_sum, ref_len_sum, smooth)


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f_beta: float
    beta: float = ROUGE_BETA

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_beta": self.f_beta,
            "beta": self.beta,
        }


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # single-row DP over the shorter sequence
    if len(b) > len(a):
        a, b = b, a
    row = [0] * (len(b) + 1)
    for token_a in a:
        prev_diag = 0
        for j, token_b in enumerate(b, start=1):
            prev_row = row[j]
            if token_a == token_b:
                row[j] = prev_diag + 1
            elif row[j - 1] > row[j]:
                row[j] = row[j - 1]
            prev_diag = prev_row
    return row[len(b)]


def rouge_l(candidate: str, reference: str, beta: float = ROUGE_BETA) -> RougeScore:
    """LCS-based precision, recall, and F_beta."""
    cand_tokens = tokenize(candidate)
    ref_tokens = tokenize(reference)
    if not cand_tokens or not ref_tokens:
        warnings.warn("rouge_l: empty input scores all zeros", stacklevel=2)
        return RougeScore(0.0, 0.0, 0.0, beta)
    lcs = _lcs_length(cand_tokens, ref_tokens)
    precision = lcs / len(cand_tokens)
    recall = lcs / len(ref_tokens)
    if precision == 0.0 or recall == 0.0:
        return RougeScore(precision, recall, 0.0, beta)
    beta_sq = beta * beta
    f_beta = (1 + beta_sq) * precision * recall / (recall + beta_sq * precision)
    return RougeScore(precision, recall, f_beta, beta)


@dataclass
class MetricReport:
    """Per-class scores, macro averages, and optional generation metrics."""

    labels: tuple[str, ...]
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    confusion: list[list[int]]
    corpus_bleu: float | None = None
    mean_rouge_l: float | None = None
    metadata: dict = field(default_factory=dict)

    def validate(self) -> "MetricReport":
        values = [
            *self.precision.values(),
            *self.recall.values(),
            *self.f1.values(),
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.accuracy,
        ]
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValidationError("metric values out of [0, 1]")
        for label, row in zip(self.labels, self.confusion):
            if sum(row) != self.support[label]:
                raise ValidationError(
                    f"confusion row for {label!r} sums to {sum(row)}, "
                    f"support is {self.support[label]}"
                )
        return self

    def to_dict(self) -> dict:
        per_class = {
            label: {
                "precision": self.precision[label],
                "recall": self.recall[label],
                "f1": self.f1[label],
                "support": self.support[label],
            }
            for label in self.labels
        }
        payload = {
            "labels": list(self.labels),
            "per_class": per_class,
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "accuracy": self.accuracy,
            "confusion": self.confusion,
            "metadata": dict(self.metadata),
        }
        if self.corpus_bleu is not None:
            payload["corpus_bleu"] = self.corpus_bleu
        if self.mean_rouge_l is not None:
            payload["mean_rouge_l"] = self.mean_rouge_l
        return payload


def classification_report(
    gold: Sequence[str],
    predicted: Sequence[str],
    labels: Sequence[str] = LABELS,
) -> MetricReport:
    """Per-class precision/recall/F1, macro averages, confusion matrix."""
    if len(gold) != len(predicted):
        raise ValidationError(
            f"{len(gold)} gold labels vs {len(predicted)} predictions"
        )
    if not gold:
        raise ValidationError("classification_report requires at least one example")
    known = set(labels)
    for name, sequence in (("gold", gold), ("predicted", predicted)):
        unseen = sorted(set(sequence) - known)
        if unseen:
            raise ValidationError(f"unseen {name} labels: {unseen}")
    index = {label: i for i, label in enumerate(labels)}
    confusion = [[0] * len(labels) for _ in labels]
    for g, p in zip(gold, predicted):
        confusion[index[g]][index[p]] += 1
    precision: dict[str, float] = {}
    recall: dict[str, float] = {}
    f1: dict[str, float] = {}
    support: dict[str, int] = {}
    for label in labels:
        i = index[label]
        true_pos = confusion[i][i]
        col_sum = sum(row[i] for row in confusion)
        row_sum = sum(confusion[i])
        p = true_pos / col_sum if col_sum else 0.0
        r = true_pos / row_sum if row_sum else 0.0
        precision[label] = p
        recall[label] = r
        f1[label] = 2 * p * r / (p + r) if p + r else 0.0
        support[label] = row_sum
    n_labels = len(labels)
    report = MetricReport(
        labels=tuple(labels),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_precision=sum(precision.values()) / n_labels,
        macro_recall=sum(recall.values()) / n_labels,
        macro_f1=sum(f1.values()) / n_labels,
        accuracy=sum(confusion[i][i] for i in range(n_labels)) / len(gold),
        confusion=confusion,
        metadata={"tokenizer": TOKENIZER_ID},
    )
    return report.validate()


def generation_report(
    candidates: Sequence[str],
    references: Sequence[Sequence[str]],
    labels: Sequence[str] = LABELS,
) -> MetricReport:
    """Corpus BLEU plus mean ROUGE-L F over candidate/reference pairs."""
    rouge_scores = [
        rouge_l(candidate, refs[0]) for candidate, refs in zip(candidates, references)
    ]
    empty = [[0] * len(labels) for _ in labels]
    return MetricReport(
        labels=tuple(labels),
        precision={label: 0.0 for label in labels},
        recall={label: 0.0 for label in labels},
        f1={label: 0.0 for label in labels},
        support={label: 0 for label in labels},
        macro_precision=0.0,
        macro_recall=0.0,
        macro_f1=0.0,
        accuracy=0.0,
        confusion=empty,
        corpus_bleu=corpus_bleu(candidates, references),
        mean_rouge_l=sum(s.f_beta for s in rouge_scores) / len(rouge_scores),
        metadata={
            "tokenizer": TOKENIZER_ID,
            "bleu_smoothing": BLEU_SMOOTHING_ID,
            "rouge_beta": ROUGE_BETA,
        },
    )


def format_classification_table(report: MetricReport) -> str:
    """Aligned text table: one row per class plus a macro-average row."""
    rows = [
        (label.capitalize(), report.precision[label], report.recall[label],
         report.f1[label])
        for label in report.labels
    ]
    rows.append(
        ("Average", report.macro_precision, report.macro_recall, report.macro_f1)
    )
    header = ("", "Precision", "Recall", "F1-Score")
    name_width = max(len(header[0]), *(len(r[0]) for r in rows))
    widths = [max(len(h), 7) for h in header[1:]]
    lines = [
        "  ".join(
            [header[0].ljust(name_width)]
            + [h.rjust(w) for h, w in zip(header[1:], widths)]
        ).rstrip()
    ]
    for name, p, r, f in rows:
        cells = [f"{v:.3f}".rjust(w) for v, w in zip((p, r, f), widths)]
        lines.append("  ".join([name.ljust(name_width)] + cells))
    return "\n".join(lines) + "\n"
