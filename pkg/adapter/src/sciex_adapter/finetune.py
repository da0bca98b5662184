"""Single-task finetuning of a seq2seq checkpoint on an exported prompt set.

The trainer never computes task metrics itself: after every epoch it
generates dev completions and shells out to the primary CLI's evaluate
subcommand, reading overall partial F1 (in percentage points) back from the
report. Early stopping and checkpoint ranking both key on that number, so
there is a single source of truth for the metric.

Checkpoint policy: the two best epochs (by dev overall partial F1) plus the
last epoch are kept; the winner is additionally materialized under best/ and
the final epoch under last/.
"""

from __future__ import annotations

import csv
import json
import logging
import random
import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

# Hyperparameter sets used in the reference experiments; other values are
# allowed for smoke runs (the toy test trains 2 epochs).
STANDARD_BATCH_SIZES = (16, 32)
STANDARD_EPOCHS = (10, 15, 20, 30)


@dataclass
class TrainConfig:
    base_checkpoint: str
    batch_size: int = 16
    max_epochs: int = 10
    early_stop_min_improvement: float = 0.1  # percentage points of partial F1
    early_stop_patience: int = 10
    max_input_len: int = 512
    max_target_len: int = 128
    eval_template: str = "squad_v2-7"
    format: str = "text"
    seed: int = 0
    sciex_cmd: tuple[str, ...] = field(default_factory=lambda: _default_sciex_cmd())

    def __post_init__(self):
        if self.early_stop_min_improvement <= 0 or self.early_stop_patience <= 0:
            raise ValueError("early stop thresholds must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.batch_size not in STANDARD_BATCH_SIZES:
            log.info("batch_size %d outside the standard set %s", self.batch_size, STANDARD_BATCH_SIZES)
        if self.max_epochs not in STANDARD_EPOCHS:
            log.info("max_epochs %d outside the standard set %s", self.max_epochs, STANDARD_EPOCHS)


def _default_sciex_cmd() -> tuple[str, ...]:
    if shutil.which("sciex"):
        return ("sciex",)
    return (sys.executable, "-m", "sciex.cli")


class EarlyStopper:
    """Stop when the metric fails to improve by min_improvement for
    patience consecutive epochs."""

    def __init__(self, min_improvement: float, patience: int):
        self.min_improvement = min_improvement
        self.patience = patience
        self.best = float("-inf")
        self.stale_epochs = 0

    def update(self, value: float) -> bool:
        """Record an epoch value; True means training should stop."""
        if value >= self.best + self.min_improvement:
            self.best = max(self.best, value)
            self.stale_epochs = 0
        else:
            self.stale_epochs += 1
        return self.stale_epochs >= self.patience


def read_examples(path: str | Path) -> list[dict]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                if "prompt" not in row or "target" not in row:
                    raise ValueError(f"{path}: rows must carry prompt and target")
                examples.append({"prompt": row["prompt"], "target": row["target"]})
    if not examples:
        raise ValueError(f"{path}: no training examples")
    return examples


def _run_primary(cmd: tuple[str, ...], args: list[str]) -> None:
    result = subprocess.run(
        list(cmd) + args, capture_output=True, text=True
    )
    if result.returncode != 0:
        raise RuntimeError(
            f"primary CLI failed ({' '.join(args[:2])}): {result.stderr.strip()}"
        )


def build_dev_prompts(cfg: TrainConfig, dev_gold: Path, out_path: Path) -> list[dict]:
    _run_primary(
        cfg.sciex_cmd,
        [
            "build-prompts",
            "--gold", str(dev_gold),
            "--out", str(out_path),
            "--format", cfg.format,
            "--strategy", "single",
            "--templates", cfg.eval_template,
            "--seed", str(cfg.seed),
        ],
    )
    with open(out_path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def evaluate_dev(
    cfg: TrainConfig, pred_path: Path, dev_gold: Path, report_path: Path
) -> float:
    """Overall partial F1 in percentage points, from the primary evaluator."""
    _run_primary(
        cfg.sciex_cmd,
        [
            "evaluate",
            "--pred", str(pred_path),
            "--gold", str(dev_gold),
            "--format", cfg.format,
            "--mode", "partial",
            "--report", str(report_path),
        ],
    )
    report = json.loads(report_path.read_text("utf-8"))
    return 100.0 * report["partial"]["overall"]["f1"]


class _Trainer:
    def __init__(self, cfg: TrainConfig):
        import torch
        from transformers import AutoTokenizer, T5ForConditionalGeneration
        from transformers.optimization import Adafactor, AdafactorSchedule

        torch.manual_seed(cfg.seed)
        self.torch = torch
        self.cfg = cfg
        self.tokenizer = AutoTokenizer.from_pretrained(cfg.base_checkpoint)
        self.model = T5ForConditionalGeneration.from_pretrained(cfg.base_checkpoint)
        # Appendix-style Adafactor: internally scheduled learning rate
        self.optimizer = Adafactor(
            self.model.parameters(),
            scale_parameter=True,
            relative_step=True,
            warmup_init=True,
            lr=None,
        )
        self.schedule = AdafactorSchedule(self.optimizer)

    def train_epoch(self, examples: list[dict], rng: random.Random) -> float:
        cfg, torch = self.cfg, self.torch
        self.model.train()
        order = list(range(len(examples)))
        rng.shuffle(order)
        total_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [examples[i] for i in order[start : start + cfg.batch_size]]
            encoded = self.tokenizer(
                [b["prompt"] for b in batch],
                padding=True,
                truncation=True,
                max_length=cfg.max_input_len,
                return_tensors="pt",
            )
            labels = self.tokenizer(
                text_target=[b["target"] for b in batch],
                padding=True,
                truncation=True,
                max_length=cfg.max_target_len,
                return_tensors="pt",
            ).input_ids
            labels[labels == self.tokenizer.pad_token_id] = -100
            output = self.model(**encoded, labels=labels)
            output.loss.backward()
            self.optimizer.step()
            self.schedule.step()
            self.optimizer.zero_grad()
            total_loss += float(output.loss.detach())
            n_batches += 1
        return total_loss / max(n_batches, 1)

    def generate_greedy(self, prompts: list[str]) -> list[str]:
        cfg, torch = self.cfg, self.torch
        self.model.eval()
        completions = []
        with torch.no_grad():
            for prompt in prompts:
                encoded = self.tokenizer(
                    prompt,
                    return_tensors="pt",
                    truncation=True,
                    max_length=cfg.max_input_len,
                )
                out = self.model.generate(
                    **encoded,
                    max_new_tokens=cfg.max_target_len,
                    do_sample=False,
                    num_beams=1,
                )
                completions.append(
                    self.tokenizer.decode(out[0], skip_special_tokens=True)
                )
        return completions

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        self.model.save_pretrained(directory)
        self.tokenizer.save_pretrained(directory)


def finetune(
    train_jsonl: str | Path,
    dev_gold: str | Path,
    cfg: TrainConfig,
    out_dir: str | Path,
    dev_prompts_path: str | Path | None = None,
) -> Path:
    """Train, evaluating on dev each epoch; returns the checkpoint directory.

    Layout under out_dir: epoch-N/ (two best + last), best/, last/,
    training_log.csv, checkpoints.json, dev/epoch-N.pred.jsonl and
    dev/epoch-N.report.json for every epoch.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dev_dir = out_dir / "dev"
    dev_dir.mkdir(exist_ok=True)

    examples = read_examples(train_jsonl)
    dev_gold = Path(dev_gold)
    if dev_prompts_path is None:
        dev_prompts_path = dev_dir / "dev_prompts.jsonl"
        dev_prompts = build_dev_prompts(cfg, dev_gold, Path(dev_prompts_path))
    else:
        with open(dev_prompts_path, encoding="utf-8") as fh:
            dev_prompts = [json.loads(line) for line in fh if line.strip()]

    trainer = _Trainer(cfg)
    rng = random.Random(cfg.seed)
    stopper = EarlyStopper(cfg.early_stop_min_improvement, cfg.early_stop_patience)
    log_rows = []
    ranked: list[tuple[float, int]] = []  # (dev f1, epoch)
    last_epoch = 0

    for epoch in range(1, cfg.max_epochs + 1):
        train_loss = trainer.train_epoch(examples, rng)
        completions = trainer.generate_greedy([p["prompt"] for p in dev_prompts])
        pred_path = dev_dir / f"epoch-{epoch}.pred.jsonl"
        with open(pred_path, "w", encoding="utf-8") as fh:
            for prompt, completion in zip(dev_prompts, completions):
                fh.write(
                    json.dumps(
                        {
                            "record_id": prompt["record_id"],
                            "template_id": prompt["template_id"],
                            "format": prompt["format"],
                            "completion": completion,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        report_path = dev_dir / f"epoch-{epoch}.report.json"
        dev_f1 = evaluate_dev(cfg, pred_path, dev_gold, report_path)
        log.info("epoch %d: train loss %.4f, dev overall partial F1 %.2f", epoch, train_loss, dev_f1)
        log_rows.append({"epoch": epoch, "train_loss": round(train_loss, 6), "dev_overall_partial_f1": dev_f1})

        trainer.save(out_dir / f"epoch-{epoch}")
        ranked.append((dev_f1, epoch))
        last_epoch = epoch
        _prune_checkpoints(out_dir, ranked, last_epoch)

        if stopper.update(dev_f1):
            log.info("early stop after epoch %d", epoch)
            break

    with open(out_dir / "training_log.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["epoch", "train_loss", "dev_overall_partial_f1"]
        )
        writer.writeheader()
        writer.writerows(log_rows)

    kept = _kept_epochs(ranked, last_epoch)
    best_epoch = max(ranked, key=lambda t: (t[0], -t[1]))[1]
    for alias, epoch in (("best", best_epoch), ("last", last_epoch)):
        alias_dir = out_dir / alias
        if alias_dir.exists():
            shutil.rmtree(alias_dir)
        shutil.copytree(out_dir / f"epoch-{epoch}", alias_dir)
    (out_dir / "checkpoints.json").write_text(
        json.dumps(
            {
                "best_epochs": sorted(kept - {last_epoch}) or [best_epoch],
                "best": best_epoch,
                "last": last_epoch,
                "stopped_early": stopper.stale_epochs >= cfg.early_stop_patience,
                "config": {
                    "base_checkpoint": cfg.base_checkpoint,
                    "batch_size": cfg.batch_size,
                    "max_epochs": cfg.max_epochs,
                    "early_stop_min_improvement": cfg.early_stop_min_improvement,
                    "early_stop_patience": cfg.early_stop_patience,
                    "max_input_len": cfg.max_input_len,
                    "max_target_len": cfg.max_target_len,
                    "eval_template": cfg.eval_template,
                    "format": cfg.format,
                    "seed": cfg.seed,
                    "decoding": "greedy",
                },
            },
            indent=2,
        ),
        "utf-8",
    )
    return out_dir


def _kept_epochs(ranked: list[tuple[float, int]], last_epoch: int) -> set[int]:
    best_two = sorted(ranked, key=lambda t: (-t[0], t[1]))[:2]
    return {epoch for _, epoch in best_two} | {last_epoch}


def _prune_checkpoints(out_dir: Path, ranked: list[tuple[float, int]], last_epoch: int) -> None:
    keep = _kept_epochs(ranked, last_epoch)
    for path in out_dir.glob("epoch-*"):
        try:
            epoch = int(path.name.split("-", 1)[1])
        except ValueError:
            continue
        if epoch not in keep:
            shutil.rmtree(path)
