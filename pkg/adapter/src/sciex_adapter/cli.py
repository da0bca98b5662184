"""sciex-adapter command line: make-toy, serve, finetune."""

from __future__ import annotations

import logging
import sys

import click

from . import __version__


@click.group()
@click.version_option(__version__)
def main():
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@main.command("make-toy")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option(
    "--corpus",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Exported {prompt,target} JSONL whose tokens seed the vocabulary.",
)
@click.option("--seed", type=int, default=0, show_default=True)
def make_toy_cmd(out_dir, corpus, seed):
    """Build a tiny randomly-initialized checkpoint for smoke testing."""
    from .toy import build_toy_checkpoint, texts_from_jsonl

    texts = texts_from_jsonl(corpus) if corpus else ["unanswerable"]
    path = build_toy_checkpoint(out_dir, texts, seed=seed)
    click.echo(f"toy checkpoint -> {path}")


@main.command("serve")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--num-beams", type=int, default=1, show_default=True,
              help="1 = greedy decoding (deterministic).")
@click.option("--max-input-len", type=int, default=512, show_default=True)
def serve_cmd(checkpoint, port, host, num_beams, max_input_len):
    """Serve /health and /generate for a checkpoint."""
    from .server import serve

    try:
        serve(checkpoint, port=port, host=host, num_beams=num_beams,
              max_input_len=max_input_len)
    except Exception as exc:
        click.echo(f"failed to load checkpoint: {exc}", err=True)
        sys.exit(1)


@main.command("finetune")
@click.option("--train", "train_jsonl", required=True, type=click.Path(exists=True))
@click.option("--dev-gold", required=True, type=click.Path(exists=True))
@click.option("--base-checkpoint", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--max-epochs", type=int, default=10, show_default=True)
@click.option("--patience", type=int, default=10, show_default=True)
@click.option("--min-improvement", type=float, default=0.1, show_default=True,
              help="Percentage points of dev overall partial F1.")
@click.option("--max-input-len", type=int, default=512, show_default=True)
@click.option("--max-target-len", type=int, default=128, show_default=True)
@click.option("--eval-template", default="squad_v2-7", show_default=True)
@click.option("--format", "format_", type=click.Choice(["text", "json"]),
              default="text", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def finetune_cmd(
    train_jsonl, dev_gold, base_checkpoint, out_dir, batch_size, max_epochs,
    patience, min_improvement, max_input_len, max_target_len, eval_template,
    format_, seed,
):
    """Finetune on an exported prompt set with dev-metric early stopping."""
    from .finetune import TrainConfig, finetune

    cfg = TrainConfig(
        base_checkpoint=base_checkpoint,
        batch_size=batch_size,
        max_epochs=max_epochs,
        early_stop_patience=patience,
        early_stop_min_improvement=min_improvement,
        max_input_len=max_input_len,
        max_target_len=max_target_len,
        eval_template=eval_template,
        format=format_,
        seed=seed,
    )
    try:
        out = finetune(train_jsonl, dev_gold, cfg, out_dir)
    except (ValueError, RuntimeError) as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    click.echo(f"checkpoints -> {out}")


if __name__ == "__main__":
    main()
