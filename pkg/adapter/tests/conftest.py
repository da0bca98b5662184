"""Shared fixtures: a tiny corpus exported through the primary CLI and a toy
checkpoint whose vocabulary covers it."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest


def run_sciex(args):
    result = subprocess.run(
        [sys.executable, "-m", "sciex.cli"] + args, capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr
    return result


GOLD_ROWS = [
    {
        "cord_id": f"c{i}",
        "title": f"Outbreak study {i}",
        "abstract": f"Abstract {i} reporting a basic reproduction number estimate.",
        "answerable": i % 2 == 0,
        "contributions": (
            [{"disease name": "COVID-19", "R0 value": f"2.{i}"}] if i % 2 == 0 else []
        ),
    }
    for i in range(24)
]


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("adapter")
    gold = root / "gold.jsonl"
    with open(gold, "w", encoding="utf-8") as fh:
        for row in GOLD_ROWS[:20]:
            fh.write(json.dumps(row) + "\n")
    dev_gold = root / "dev_gold.jsonl"
    with open(dev_gold, "w", encoding="utf-8") as fh:
        for row in GOLD_ROWS[20:]:
            fh.write(json.dumps(row) + "\n")

    prompts = root / "prompts.jsonl"
    run_sciex(
        [
            "build-prompts",
            "--gold", str(gold),
            "--out", str(prompts),
            "--format", "text",
            "--strategy", "single",
            "--templates", "s7",
        ]
    )
    train = root / "train.jsonl"
    run_sciex(["export-finetune", "--prompts", str(prompts), "--out", str(train)])
    return {"root": root, "gold": gold, "dev_gold": dev_gold, "train": train}


@pytest.fixture(scope="session")
def toy_checkpoint(workdir):
    from sciex_adapter.toy import build_toy_checkpoint, texts_from_jsonl

    texts = texts_from_jsonl(workdir["train"])
    return build_toy_checkpoint(workdir["root"] / "toy", texts, seed=1)
