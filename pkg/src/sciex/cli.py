"""The sciex command line: filter -> dedup -> split -> build-prompts ->
export-finetune -> infer -> parse -> evaluate -> analyze-errors.

Exit codes: 0 on success, 1 on data errors (a JSON error object goes to
stderr), 2 on usage errors. Every stage reads and writes JSON-lines with
explicit schemas and drops a run manifest beside its output.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import __version__, codec, corpus, error_analysis, evaluation, gateway, templates
from .exceptions import SciexError
from .manifest import RunManifest
from .model import (
    AnnotatedRecord,
    AnswerFormat,
    annotated_from_json,
    annotated_to_json,
    read_jsonl,
    record_from_json,
    record_to_json,
    write_jsonl,
)


def data_errors_to_exit_code(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SciexError as exc:
            sys.stderr.write(json.dumps(exc.to_json()) + "\n")
            raise SystemExit(1)

    return wrapper


@click.group()
@click.version_option(__version__)
@click.option("--seed", type=int, default=0, show_default=True, help="Global RNG seed.")
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with per-subcommand default flag values.",
)
@click.option("--quiet", is_flag=True, help="Only log warnings and errors.")
@click.pass_context
def main(ctx, seed, config, quiet):
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("httpx").setLevel(logging.WARNING)
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    if config:
        ctx.default_map = json.loads(Path(config).read_text("utf-8"))


def _resolve_seed(ctx, seed):
    return ctx.obj["seed"] if seed is None else seed


def _read_annotated(path: str) -> list[AnnotatedRecord]:
    with open(path, encoding="utf-8") as fh:
        return [annotated_from_json(row) for row in read_jsonl(fh)]


def _read_predictions(path: str, template: str | None) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        rows = list(read_jsonl(fh))
    template_ids = {row.get("template_id") for row in rows}
    if template is not None:
        wanted = str(templates.TemplateId.parse(template))
        rows = [r for r in rows if r.get("template_id") == wanted]
        if not rows:
            raise SciexError(f"no predictions for template {wanted}")
    elif len(template_ids) > 1:
        raise SciexError(
            "prediction file mixes templates "
            f"({', '.join(sorted(map(str, template_ids)))}); pass --template"
        )
    return rows


def _parse_predictions(
    rows: list[dict], format: AnswerFormat
) -> list[tuple[str, codec.ParseOutcome]]:
    return [
        (row["record_id"], codec.parse(row["completion"], format)) for row in rows
    ]


@main.command("filter")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option(
    "--patterns",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="File with one case-insensitive pattern per line; built-in list if omitted.",
)
@click.option(
    "--match-field",
    type=click.Choice(["title", "abstract", "both"]),
    default="abstract",
    show_default=True,
)
@click.option("--delimiter", default=",", show_default=True)
@data_errors_to_exit_code
def filter_cmd(in_path, out_path, patterns, match_field, delimiter):
    """Keep records whose title/abstract mentions an R0-estimate phrase."""
    if patterns:
        pattern_list = [
            line.strip()
            for line in Path(patterns).read_text("utf-8").splitlines()
            if line.strip()
        ]
    else:
        pattern_list = list(corpus.DEFAULT_PATTERNS)
    cfg = corpus.FilterConfig(patterns=tuple(pattern_list), match_field=match_field)
    manifest = RunManifest(
        "filter",
        {
            "patterns": pattern_list,
            "match_field": match_field,
            "delimiter": delimiter,
        },
    )
    manifest.add_input(in_path)
    with open(in_path, encoding="utf-8", newline="") as fh:
        records = list(corpus.read_metadata_csv(fh, delimiter=delimiter))
    kept = corpus.filter_corpus(records, cfg)
    with open(out_path, "w", encoding="utf-8") as fh:
        write_jsonl((record_to_json(r) for r in kept), fh)
    manifest.add_output(out_path)
    manifest.add_stats(total=len(records), kept=len(kept), dropped=len(records) - len(kept))
    manifest.write_for(out_path)
    click.echo(f"kept {len(kept)} of {len(records)} records -> {out_path}")


@main.command("dedup")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option(
    "--policy",
    type=click.Choice(["longest", "first_id"]),
    default="longest",
    show_default=True,
)
@click.option(
    "--clusters-out",
    type=click.Path(),
    default=None,
    help="Optionally dump near-duplicate clusters as JSON-lines.",
)
@data_errors_to_exit_code
def dedup_cmd(in_path, out_path, threshold, policy, clusters_out):
    """Drop exact duplicates, then one-per-cluster near duplicates."""
    with open(in_path, encoding="utf-8") as fh:
        records = [record_from_json(row) for row in read_jsonl(fh)]
    manifest = RunManifest("dedup", {"threshold": threshold, "policy": policy})
    manifest.add_input(in_path)

    exact = corpus.dedup_exact(records)
    clusters = corpus.cluster_near_duplicates(exact, threshold=threshold)
    drops = set(corpus.select_representatives(clusters, exact, policy=policy))
    kept = [r for r in exact if r.id not in drops]

    with open(out_path, "w", encoding="utf-8") as fh:
        write_jsonl((record_to_json(r) for r in kept), fh)
    manifest.add_output(out_path)
    if clusters_out:
        with open(clusters_out, "w", encoding="utf-8") as fh:
            write_jsonl(
                (
                    {
                        "members": c.members,
                        "representative": c.representative,
                        "pairwise_similarity": c.pairwise_similarity,
                    }
                    for c in clusters
                ),
                fh,
            )
        manifest.add_output(clusters_out)
    manifest.add_stats(
        total=len(records),
        after_exact=len(exact),
        clusters=len(clusters),
        near_duplicates_dropped=len(drops),
        kept=len(kept),
    )
    manifest.write_for(out_path)
    click.echo(
        f"{len(records)} -> {len(exact)} after exact dedup -> {len(kept)} after "
        f"{len(clusters)} clusters -> {out_path}"
    )


def _parse_fractions(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise SciexError(f"expected three comma-separated fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise SciexError(f"non-numeric fraction in {text!r}") from None


@main.command("split")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--fractions", default="0.7,0.1,0.2", show_default=True)
@click.option("--seed", type=int, default=None, help="Overrides the global --seed.")
@click.option(
    "--ans-fractions",
    default=None,
    help="Override the triple for the answerable stratum.",
)
@click.option(
    "--unans-fractions",
    default=None,
    help="Override the triple for the unanswerable stratum.",
)
@click.pass_context
@data_errors_to_exit_code
def split_cmd(ctx, in_path, out_dir, fractions, seed, ans_fractions, unans_fractions):
    """Stratified train/dev/test split of an annotated JSONL corpus."""
    seed = _resolve_seed(ctx, seed)
    stratum_fractions = {}
    if ans_fractions:
        stratum_fractions[True] = _parse_fractions(ans_fractions)
    if unans_fractions:
        stratum_fractions[False] = _parse_fractions(unans_fractions)
    spec = corpus.SplitSpec(
        fractions=_parse_fractions(fractions),
        seed=seed,
        stratum_fractions=stratum_fractions,
    )
    annotated = _read_annotated(in_path)
    train, dev, test = corpus.split_dataset(annotated, spec)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        "split",
        {
            "fractions": list(spec.fractions),
            "seed": seed,
            "ans_fractions": ans_fractions,
            "unans_fractions": unans_fractions,
        },
    )
    manifest.add_input(in_path)
    sizes = {}
    for name, part in [("train", train), ("dev", dev), ("test", test)]:
        path = out_dir / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            write_jsonl((annotated_to_json(r) for r in part), fh)
        manifest.add_output(path)
        sizes[name] = {
            "total": len(part),
            "answerable": sum(r.answerable for r in part),
        }
    manifest.add_stats(sizes=sizes)
    manifest.write(out_dir / "split.manifest.json")
    click.echo(
        "split sizes: "
        + ", ".join(f"{k}={v['total']} ({v['answerable']} ans)" for k, v in sizes.items())
    )


@main.command("build-prompts")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--format", "format_", type=click.Choice(["text", "json"]), required=True)
@click.option(
    "--role",
    type=click.Choice(["train", "test"]),
    default="train",
    show_default=True,
)
@click.option(
    "--strategy",
    type=click.Choice(["single", "all", "best"]),
    default="single",
    show_default=True,
)
@click.option(
    "--templates",
    "template_ids",
    default=None,
    help="Comma-separated template ids (s1..s10/d1..d10 or squad_v2-N/drop-N); "
    "required for single/best, ignored for all.",
)
@click.option("--subsample", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.pass_context
@data_errors_to_exit_code
def build_prompts_cmd(
    ctx, gold_path, out_path, format_, role, strategy, template_ids, subsample, seed
):
    """Instantiate instruction prompts with gold targets."""
    seed = _resolve_seed(ctx, seed)
    if strategy == "all":
        template_list = templates.list_templates(role)
    else:
        if not template_ids:
            raise SciexError(f"strategy={strategy} requires --templates")
        template_list = [templates.get_template(t) for t in template_ids.split(",")]
    annotated = _read_annotated(gold_path)
    instances = templates.build_prompt_set(
        annotated,
        template_list,
        AnswerFormat(format_),
        strategy=strategy,
        subsample=subsample,
        seed=seed,
    )
    manifest = RunManifest(
        "build-prompts",
        {
            "format": format_,
            "role": role,
            "strategy": strategy,
            "templates": [str(t.id) for t in template_list],
            "subsample": subsample,
            "seed": seed,
        },
    )
    manifest.add_input(gold_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        write_jsonl((i.to_json() for i in instances), fh)
    manifest.add_output(out_path)
    manifest.add_stats(
        n_instances=len(instances),
        includes_train_only=templates.includes_train_only(template_list),
    )
    manifest.write_for(out_path)
    click.echo(f"wrote {len(instances)} prompt instances -> {out_path}")


@main.command("export-finetune")
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--strategy", default=None)
@click.option("--subsample", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
@data_errors_to_exit_code
def export_finetune_cmd(ctx, prompts_path, out_path, strategy, subsample, seed):
    """Flatten a prompt set into {prompt, target} JSON-lines for finetuning."""
    with open(prompts_path, encoding="utf-8") as fh:
        instances = [templates.PromptInstance.from_json(row) for row in read_jsonl(fh)]
    export = gateway.export_finetune_dataset(
        instances,
        out_path,
        strategy=strategy,
        subsample=subsample,
        seed=seed if seed is not None else ctx.obj["seed"],
    )
    manifest = RunManifest(
        "export-finetune",
        {"strategy": strategy, "subsample": subsample, "seed": seed},
    )
    manifest.add_input(prompts_path)
    manifest.add_output(out_path)
    manifest.add_stats(export=export.to_json())
    manifest.write_for(out_path)
    click.echo(f"exported {export.n_instances} examples -> {out_path}")


@main.command("infer")
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True))
@click.option(
    "--backend",
    required=True,
    envvar="SCIEX_BACKEND",
    help="http(s)://... endpoint, echo:, or gold:PROMPTS.jsonl.",
)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--concurrency", type=int, default=4, show_default=True)
@click.option("--max-new-tokens", type=int, default=512, show_default=True)
@click.option("--timeout", type=float, default=60.0, show_default=True)
@click.option("--max-retries", type=int, default=2, show_default=True)
@click.option(
    "--cache",
    "cache_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Response cache directory; reruns hit the cache instead of the backend.",
)
@data_errors_to_exit_code
def infer_cmd(
    prompts_path, backend, out_path, concurrency, max_new_tokens, timeout, max_retries, cache_dir
):
    """Drive a generation backend over a prompt set."""
    with open(prompts_path, encoding="utf-8") as fh:
        instances = [templates.PromptInstance.from_json(row) for row in read_jsonl(fh)]
    cfg = gateway.BackendConfig(
        endpoint=backend,
        timeout=timeout,
        max_concurrency=concurrency,
        max_retries=max_retries,
        max_new_tokens=max_new_tokens,
    )
    cache = gateway.ResponseCache(cache_dir) if cache_dir else None
    results = gateway.generate_batch(instances, cfg, cache=cache)
    manifest = RunManifest(
        "infer",
        {
            "backend": backend,
            "concurrency": concurrency,
            "max_new_tokens": max_new_tokens,
            "timeout": timeout,
            "max_retries": max_retries,
            "cache": cache_dir,
        },
    )
    manifest.add_input(prompts_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        rows = []
        for instance, result in zip(instances, results):
            row = {
                "record_id": result.record_id,
                "template_id": result.template_id,
                "format": instance.format.value,
                "completion": result.completion,
            }
            if result.error:
                row["error"] = result.error
            rows.append(row)
        write_jsonl(rows, fh)
    manifest.add_output(out_path)
    failures = sum(1 for r in results if r.error)
    manifest.add_stats(
        n_prompts=len(instances),
        failures=failures,
        total_latency_ms=round(sum(r.latency_ms for r in results), 3),
    )
    manifest.write_for(out_path)
    click.echo(f"generated {len(results)} completions ({failures} failures) -> {out_path}")


@main.command("parse")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_", type=click.Choice(["text", "json"]), required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@data_errors_to_exit_code
def parse_cmd(pred_path, format_, out_path):
    """Parse raw completions into structured outcomes."""
    answer_format = AnswerFormat(format_)
    with open(pred_path, encoding="utf-8") as fh:
        rows = list(read_jsonl(fh))
    manifest = RunManifest("parse", {"format": format_})
    manifest.add_input(pred_path)
    out_rows = []
    kinds: dict[str, int] = {}
    for row in rows:
        outcome = codec.parse(row["completion"], answer_format)
        kinds[outcome.kind.value] = kinds.get(outcome.kind.value, 0) + 1
        out_rows.append(
            {
                "record_id": row["record_id"],
                "template_id": row.get("template_id"),
                **outcome.to_json(),
            }
        )
    with open(out_path, "w", encoding="utf-8") as fh:
        write_jsonl(out_rows, fh)
    manifest.add_output(out_path)
    manifest.add_stats(kinds=kinds)
    manifest.write_for(out_path)
    click.echo(f"parsed {len(out_rows)} completions {kinds} -> {out_path}")


@main.command("evaluate")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_", type=click.Choice(["text", "json"]), required=True)
@click.option(
    "--mode",
    type=click.Choice(["exact", "partial", "both"]),
    default="both",
    show_default=True,
)
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--template", default=None, help="Evaluate only this template's rows.")
@data_errors_to_exit_code
def evaluate_cmd(pred_path, gold_path, format_, mode, report_path, template):
    """Score parsed predictions against gold annotations."""
    answer_format = AnswerFormat(format_)
    rows = _read_predictions(pred_path, template)
    gold = _read_annotated(gold_path)
    parsed = _parse_predictions(rows, answer_format)
    references = {
        r.id: evaluation.rouge_reference(
            r, codec.serialize(list(r.contributions), answer_format) if r.answerable else ""
        )
        for r in gold
    }
    report = evaluation.evaluate(parsed, gold, references)
    payload = report.to_json()
    if mode != "both":
        payload = {
            "n_records": payload["n_records"],
            mode: payload[mode],
            "general_accuracy": payload["general_accuracy"],
            "rouge": payload["rouge"],
        }
    manifest = RunManifest(
        "evaluate",
        {"format": format_, "mode": mode, "template": template},
    )
    manifest.add_input(pred_path)
    manifest.add_input(gold_path)
    Path(report_path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8"
    )
    manifest.add_output(report_path)
    manifest.write_for(report_path)
    summary = []
    for m in ("exact", "partial"):
        if mode in (m, "both"):
            section = report.exact if m == "exact" else report.partial
            summary.append(f"{m} overall F1 {100 * section.overall.f1:.2f}")
    summary.append(f"general accuracy {report.general_accuracy:.2f}")
    click.echo("; ".join(summary))


@main.command("analyze-errors")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_", type=click.Choice(["text", "json"]), required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@click.option("--template", default=None)
@click.option(
    "--per-record",
    "per_record_path",
    type=click.Path(),
    default=None,
    help="Optionally dump per-record error codes as JSON-lines.",
)
@data_errors_to_exit_code
def analyze_errors_cmd(
    pred_path, gold_path, format_, out_path, plot_path, template, per_record_path
):
    """Classify mismatches into the error taxonomy and tally distributions."""
    answer_format = AnswerFormat(format_)
    rows = _read_predictions(pred_path, template)
    gold = _read_annotated(gold_path)
    parsed = _parse_predictions(rows, answer_format)
    joined = evaluation.join_by_id(parsed, gold)
    records, table = error_analysis.analyze(joined)
    manifest = RunManifest(
        "analyze-errors", {"format": format_, "template": template}
    )
    manifest.add_input(pred_path)
    manifest.add_input(gold_path)
    Path(out_path).write_text(
        json.dumps(table.to_json(), indent=2, ensure_ascii=False) + "\n", "utf-8"
    )
    manifest.add_output(out_path)
    if per_record_path:
        with open(per_record_path, "w", encoding="utf-8") as fh:
            write_jsonl((r.to_json() for r in records), fh)
        manifest.add_output(per_record_path)
    if plot_path:
        _plot_error_table(table, plot_path)
        manifest.add_output(plot_path)
    manifest.write_for(out_path)
    fired = {
        code.value: count for code, count in table.record_level.items() if count
    }
    click.echo(f"analyzed {table.n_records} records; error records: {fired}")


def _plot_error_table(table: error_analysis.ErrorTable, path: str) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise SciexError("matplotlib is required for --plot (pip install sciex[plot])")
    from .model import PROPERTY_ORDER

    property_codes = [
        code for code in error_analysis.ErrorType if code not in error_analysis.RECORD_LEVEL
    ]
    fig, (ax_props, ax_records) = plt.subplots(
        1, 2, figsize=(12, 4), width_ratios=[3, 1]
    )
    n_codes = len(property_codes)
    width = 0.8 / n_codes
    for idx, code in enumerate(property_codes):
        counts = [table.by_property[code][key] for key in PROPERTY_ORDER]
        positions = [i + idx * width for i in range(len(PROPERTY_ORDER))]
        ax_props.bar(positions, counts, width=width, label=code.value)
    ax_props.set_xticks([i + 0.4 for i in range(len(PROPERTY_ORDER))])
    ax_props.set_xticklabels([k.display for k in PROPERTY_ORDER], rotation=20)
    ax_props.set_ylabel("error count")
    ax_props.legend(fontsize="small")
    ax_props.set_title("property-level errors")

    record_codes = sorted(error_analysis.RECORD_LEVEL, key=lambda c: c.value)
    ax_records.bar(
        [c.value for c in record_codes],
        [table.record_level[c] for c in record_codes],
    )
    ax_records.set_title("record-level errors")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


if __name__ == "__main__":
    main()
