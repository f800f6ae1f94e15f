"""Builders for tiny local stand-in checkpoints.

Real deployments point the service at fine-tuned checkpoints. These builders
produce architecture-compatible miniatures (same model classes, same tokenizer
format, seeded weights) so the service and its tests run offline and fast.
Swapping in a production checkpoint is a config change, not a code change.
"""

from __future__ import annotations

from pathlib import Path

import torch
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.normalizers import Lowercase
from tokenizers.pre_tokenizers import Whitespace
from transformers import (
    BertConfig,
    BertModel,
    GPT2Config,
    GPT2ForSequenceClassification,
    PreTrainedTokenizerFast,
    T5Config,
    T5ForConditionalGeneration,
)

PAD, UNK, EOS, SEP = "[PAD]", "[UNK]", "[EOS]", "[SEP]"

# Small closed vocabulary. Lowercased word-level tokens keep the miniatures
# deterministic and dependency-free; anything else, punctuation included,
# maps to [UNK]. Keeping punctuation out of the vocabulary means a random
# generator can only ever decode real words.
_WORDS = [
    "southern", "california", "often", "abbreviated", "socal", "is", "a",
    "geographic", "and", "cultural", "region", "that", "generally",
    "comprises", "the", "what", "which", "how", "why", "who", "does", "do",
    "describe", "describes", "following", "about", "abbreviation", "for",
    "of", "in", "to", "united", "states", "state", "los", "angeles", "ten",
    "counties", "includes", "it", "this", "these", "known", "as", "area",
    "north", "south", "text", "section", "chapter", "concept", "question",
    "answer", "term", "are", "was", "were", "be", "on", "with", "by", "an",
    "or", "not", "from", "its", "also", "can", "one", "two", "three",
]

LABELS = ("general", "specific", "other")


def build_tokenizer() -> PreTrainedTokenizerFast:
    """Word-level lowercasing tokenizer shared by all three miniatures."""
    vocab: dict[str, int] = {PAD: 0, UNK: 1, EOS: 2, SEP: 3}
    for word in _WORDS:
        vocab[word] = len(vocab)
    core = Tokenizer(WordLevel(vocab, unk_token=UNK))
    core.normalizer = Lowercase()
    core.pre_tokenizer = Whitespace()
    return PreTrainedTokenizerFast(
        tokenizer_object=core,
        pad_token=PAD,
        unk_token=UNK,
        eos_token=EOS,
        sep_token=SEP,
        model_input_names=["input_ids", "attention_mask"],
    )


def build_tiny_checkpoints(dest: str | Path, seed: int = 0) -> dict[str, str]:
    """Write generator/, classifier/, and embedder/ checkpoints under dest.

    Returns the role -> directory mapping suitable for ServiceConfig.
    """
    root = Path(dest)
    tokenizer = build_tokenizer()
    vocab_size = len(tokenizer)

    paths: dict[str, str] = {}

    torch.manual_seed(seed)
    generator = T5ForConditionalGeneration(
        T5Config(
            vocab_size=vocab_size,
            d_model=32,
            d_kv=8,
            d_ff=64,
            num_layers=2,
            num_heads=2,
            decoder_start_token_id=tokenizer.pad_token_id,
            pad_token_id=tokenizer.pad_token_id,
            eos_token_id=tokenizer.eos_token_id,
            bos_token_id=None,
        )
    )
    paths["generator"] = _save(generator, tokenizer, root / "generator")

    torch.manual_seed(seed + 1)
    classifier = GPT2ForSequenceClassification(
        GPT2Config(
            vocab_size=vocab_size,
            n_positions=1024,
            n_embd=32,
            n_layer=2,
            n_head=2,
            num_labels=len(LABELS),
            id2label=dict(enumerate(LABELS)),
            label2id={label: i for i, label in enumerate(LABELS)},
            pad_token_id=tokenizer.pad_token_id,
            bos_token_id=tokenizer.eos_token_id,
            eos_token_id=tokenizer.eos_token_id,
        )
    )
    paths["classifier"] = _save(classifier, tokenizer, root / "classifier")

    torch.manual_seed(seed + 2)
    embedder = BertModel(
        BertConfig(
            vocab_size=vocab_size,
            hidden_size=32,
            num_hidden_layers=2,
            num_attention_heads=2,
            intermediate_size=64,
            max_position_embeddings=1024,
            pad_token_id=tokenizer.pad_token_id,
        )
    )
    paths["embedder"] = _save(embedder, tokenizer, root / "embedder")

    return paths


def _save(model, tokenizer: PreTrainedTokenizerFast, directory: Path) -> str:
    directory.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return str(directory)


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        description="Build tiny stand-in checkpoints for offline development."
    )
    parser.add_argument("dest", help="directory to write generator/, classifier/, embedder/")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    for role, path in build_tiny_checkpoints(args.dest, seed=args.seed).items():
        print(f"{role}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
