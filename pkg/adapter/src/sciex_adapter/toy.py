"""Construct a tiny local T5-style checkpoint for tests and smoke runs.

The sandboxed test environment has no model-hub access, so the toy
checkpoint is built from scratch: a whitespace word-level tokenizer over the
given corpus plus a randomly initialized two-layer T5. It is useless as a
model but exercises every code path (tokenize, train, generate, save, load)
exactly like a real checkpoint does.
"""

from __future__ import annotations

import json
from pathlib import Path

from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import PreTrainedTokenizerFast, T5Config, T5ForConditionalGeneration

PAD, EOS, UNK = "<pad>", "</s>", "<unk>"


def _vocab_from_texts(texts: list[str]) -> dict[str, int]:
    vocab = {PAD: 0, EOS: 1, UNK: 2}
    for text in texts:
        for token in text.split():
            if token not in vocab:
                vocab[token] = len(vocab)
    return vocab


def build_toy_checkpoint(
    out_dir: str | Path,
    corpus_texts: list[str],
    d_model: int = 64,
    num_layers: int = 2,
    seed: int = 0,
) -> Path:
    """Write a loadable checkpoint directory and return its path."""
    import torch

    torch.manual_seed(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab = _vocab_from_texts(corpus_texts)
    tokenizer = Tokenizer(models.WordLevel(vocab, unk_token=UNK))
    tokenizer.pre_tokenizer = pre_tokenizers.WhitespaceSplit()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        pad_token=PAD,
        eos_token=EOS,
        unk_token=UNK,
    )

    config = T5Config(
        vocab_size=len(vocab),
        d_model=d_model,
        d_kv=d_model // 4,
        d_ff=d_model * 2,
        num_layers=num_layers,
        num_decoder_layers=num_layers,
        num_heads=4,
        pad_token_id=vocab[PAD],
        eos_token_id=vocab[EOS],
        decoder_start_token_id=vocab[PAD],
    )
    model = T5ForConditionalGeneration(config)
    model.save_pretrained(out_dir)
    fast.save_pretrained(out_dir)
    return out_dir


def texts_from_jsonl(path: str | Path) -> list[str]:
    """Prompts and targets out of an exported {prompt, target} JSONL."""
    texts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                texts.append(row["prompt"])
                texts.append(row["target"])
    return texts
