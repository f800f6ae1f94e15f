"""Optional fine-tuning for the classifier and generator checkpoints.

The service itself runs on pre-trained checkpoints; these loops exist so a
deployment can reproduce them. Defaults: batch size 8, learning rate 5e-5,
6 epochs, AdamW with weight decay 0.1, and a cosine-annealing schedule with
warm-up. Training data is JSONL: classifier rows carry q_a/c_a/q_b/c_b and a
label in {general, specific, other}; generator rows carry context/question.
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path
from typing import Sequence

import torch
from transformers import (
    AutoModelForSeq2SeqLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
    get_cosine_schedule_with_warmup,
)

from model_service.models import LABELS, build_classifier_input

BATCH_SIZE = 8
LEARNING_RATE = 5e-5
EPOCHS = 6
WEIGHT_DECAY = 0.1
WARMUP_FRACTION = 0.1


def _read_jsonl(path: str | Path, required: Sequence[str]) -> list[dict]:
    rows: list[dict] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            missing = [key for key in required if key not in row]
            if missing:
                raise ValueError(f"line {lineno}: missing fields {missing}")
            rows.append(row)
    if not rows:
        raise ValueError(f"no training rows in {path}")
    return rows


def _schedule(optimizer, total_steps: int, warmup_fraction: float):
    warmup = max(1, int(total_steps * warmup_fraction))
    return get_cosine_schedule_with_warmup(optimizer, warmup, total_steps)


def _encode(tokenizer, texts: list[str], max_tokens: int) -> dict[str, torch.Tensor]:
    raw = tokenizer(texts, add_special_tokens=False)["input_ids"]
    clipped = [ids[:max_tokens] or [tokenizer.unk_token_id] for ids in raw]
    return tokenizer.pad({"input_ids": clipped}, return_tensors="pt")


def train_classifier(
    model_path: str,
    data_path: str | Path,
    output_dir: str | Path,
    *,
    batch_size: int = BATCH_SIZE,
    learning_rate: float = LEARNING_RATE,
    epochs: int = EPOCHS,
    weight_decay: float = WEIGHT_DECAY,
    warmup_fraction: float = WARMUP_FRACTION,
    max_tokens: int = 768,
    device: str = "cpu",
    seed: int = 0,
) -> dict:
    rows = _read_jsonl(data_path, ("q_a", "c_a", "q_b", "c_b", "label"))
    tokenizer = AutoTokenizer.from_pretrained(model_path)
    model = AutoModelForSequenceClassification.from_pretrained(model_path).to(device)
    label2id = {str(k).lower(): int(v) for k, v in model.config.label2id.items()}
    if sorted(label2id) != sorted(LABELS):
        raise ValueError(f"checkpoint must declare label2id over {LABELS}")
    for row in rows:
        if row["label"] not in label2id:
            raise ValueError(f"unknown label {row['label']!r}")

    sep = tokenizer.sep_token or "[SEP]"
    examples = [
        (
            build_classifier_input(row["q_a"], row["c_a"], row["q_b"], row["c_b"], sep=sep),
            label2id[row["label"]],
        )
        for row in rows
    ]
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=learning_rate, weight_decay=weight_decay
    )
    steps_per_epoch = (len(examples) + batch_size - 1) // batch_size
    scheduler = _schedule(optimizer, steps_per_epoch * epochs, warmup_fraction)
    rng = random.Random(seed)

    model.train()
    last_loss = 0.0
    steps = 0
    for _ in range(epochs):
        rng.shuffle(examples)
        for start in range(0, len(examples), batch_size):
            batch = examples[start : start + batch_size]
            enc = _encode(tokenizer, [text for text, _ in batch], max_tokens)
            labels = torch.tensor([label for _, label in batch], device=device)
            outputs = model(
                input_ids=enc["input_ids"].to(device),
                attention_mask=enc["attention_mask"].to(device),
                labels=labels,
            )
            outputs.loss.backward()
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            last_loss = float(outputs.loss.detach())
            steps += 1

    model.eval()
    model.save_pretrained(output_dir)
    tokenizer.save_pretrained(output_dir)
    return {"steps": steps, "epochs": epochs, "final_loss": last_loss}


def train_generator(
    model_path: str,
    data_path: str | Path,
    output_dir: str | Path,
    *,
    batch_size: int = BATCH_SIZE,
    learning_rate: float = LEARNING_RATE,
    epochs: int = EPOCHS,
    weight_decay: float = WEIGHT_DECAY,
    warmup_fraction: float = WARMUP_FRACTION,
    max_context_tokens: int = 768,
    max_question_tokens: int = 256,
    device: str = "cpu",
    seed: int = 0,
) -> dict:
    rows = _read_jsonl(data_path, ("context", "question"))
    tokenizer = AutoTokenizer.from_pretrained(model_path)
    model = AutoModelForSeq2SeqLM.from_pretrained(model_path).to(device)

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=learning_rate, weight_decay=weight_decay
    )
    steps_per_epoch = (len(rows) + batch_size - 1) // batch_size
    scheduler = _schedule(optimizer, steps_per_epoch * epochs, warmup_fraction)
    rng = random.Random(seed)
    pad_id = tokenizer.pad_token_id

    model.train()
    last_loss = 0.0
    steps = 0
    for _ in range(epochs):
        rng.shuffle(rows)
        for start in range(0, len(rows), batch_size):
            batch = rows[start : start + batch_size]
            enc = _encode(tokenizer, [r["context"] for r in batch], max_context_tokens)
            target = _encode(tokenizer, [r["question"] for r in batch], max_question_tokens)
            labels = target["input_ids"].to(device)
            # Padding must not contribute to the loss.
            labels = labels.masked_fill(labels == pad_id, -100)
            outputs = model(
                input_ids=enc["input_ids"].to(device),
                attention_mask=enc["attention_mask"].to(device),
                labels=labels,
            )
            outputs.loss.backward()
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            last_loss = float(outputs.loss.detach())
            steps += 1

    model.eval()
    model.save_pretrained(output_dir)
    tokenizer.save_pretrained(output_dir)
    return {"steps": steps, "epochs": epochs, "final_loss": last_loss}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="task", required=True)
    for task in ("classifier", "generator"):
        p = sub.add_parser(task)
        p.add_argument("--model", required=True, help="base checkpoint to fine-tune")
        p.add_argument("--data", required=True, help="JSONL training data")
        p.add_argument("--output", required=True, help="directory for the tuned checkpoint")
        p.add_argument("--batch-size", type=int, default=BATCH_SIZE)
        p.add_argument("--learning-rate", type=float, default=LEARNING_RATE)
        p.add_argument("--epochs", type=int, default=EPOCHS)
        p.add_argument("--weight-decay", type=float, default=WEIGHT_DECAY)
        p.add_argument("--device", default="cpu")
        p.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    train = train_classifier if args.task == "classifier" else train_generator
    summary = train(
        args.model,
        args.data,
        args.output,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        weight_decay=args.weight_decay,
        device=args.device,
        seed=args.seed,
    )
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
