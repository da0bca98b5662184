"""Instruction templates and prompt-set construction.

The 18 reading-comprehension instructions ship as a versioned data file
(data/templates.json) keyed by their source collection and index. Two of the
original twenty (squad_v2-3 and drop-8) are not part of this task at all;
drop-9 and drop-10 are question-generation instructions used for training
only, so the test set holds 16.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .codec import serialize
from .exceptions import InstantiationError, SciexError
from .model import AnnotatedRecord, AnswerFormat

UNANSWERABLE = "unanswerable"

QUESTION = (
    "What are the values for the following properties of the basic "
    "reproduction number estimate (R0): disease name, location, date, "
    "R0 value, %CI values, and method?"
)

_SHORT_ID = re.compile(r"^([sd])(\d+)$")
_LONG_ID = re.compile(r"^(squad_v2|drop)-(\d+)$")


@dataclass(frozen=True)
class TemplateId:
    source: str  # squad_v2 | drop
    index: int

    def __str__(self) -> str:
        return f"{self.source}-{self.index}"

    @property
    def short(self) -> str:
        return ("s" if self.source == "squad_v2" else "d") + str(self.index)

    @classmethod
    def parse(cls, text: str) -> "TemplateId":
        text = text.strip()
        m = _LONG_ID.match(text)
        if m:
            return cls(m.group(1), int(m.group(2)))
        m = _SHORT_ID.match(text)
        if m:
            return cls("squad_v2" if m.group(1) == "s" else "drop", int(m.group(2)))
        raise SciexError(f"unknown template id: {text!r}")


@dataclass(frozen=True)
class Template:
    id: TemplateId
    pattern: str
    train_only: bool

    @property
    def placeholders(self) -> list[str]:
        return re.findall(r"\{(title|context|question)\}", self.pattern)


@dataclass(frozen=True)
class PromptInstance:
    record_id: str
    template_id: str
    prompt: str
    target: str
    format: AnswerFormat

    def to_json(self) -> dict:
        return {
            "record_id": self.record_id,
            "template_id": self.template_id,
            "prompt": self.prompt,
            "target": self.target,
            "format": self.format.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PromptInstance":
        return cls(
            record_id=data["record_id"],
            template_id=data["template_id"],
            prompt=data["prompt"],
            target=data["target"],
            format=AnswerFormat(data["format"]),
        )


def the_question() -> str:
    """The fixed task-objective question naming all six properties."""
    return QUESTION


def _load_all() -> list[Template]:
    raw = json.loads(
        resources.files("sciex").joinpath("data/templates.json").read_text("utf-8")
    )
    return [
        Template(
            id=TemplateId(t["source"], t["index"]),
            pattern=t["pattern"],
            train_only=t["train_only"],
        )
        for t in raw["templates"]
    ]


_ALL = _load_all()
_BY_ID = {t.id: t for t in _ALL}


def get_template(tid: TemplateId | str) -> Template:
    if isinstance(tid, str):
        tid = TemplateId.parse(tid)
    try:
        return _BY_ID[tid]
    except KeyError:
        raise SciexError(f"no such template: {tid}") from None


def list_templates(role: str = "train") -> list[Template]:
    """train -> all 18 instructions; test -> the 16 without the train-only pair."""
    if role not in ("train", "test"):
        raise SciexError(f"unknown template role: {role!r}")
    if role == "train":
        return list(_ALL)
    return [t for t in _ALL if not t.train_only]


def instantiate(
    template: Template,
    title: str,
    abstract: str,
    question: str | None = None,
) -> str:
    """Fill the template's placeholders exactly once each.

    squad_v2-1 is the one instruction that takes the title separately; every
    other context-bearing instruction receives title + blank line + abstract
    as its context block. Question-generation templates take no question.
    """
    placeholders = template.placeholders
    if "context" in placeholders and not (title and abstract):
        raise InstantiationError(
            f"{template.id}: title and abstract must be non-empty"
        )
    fills: dict[str, str] = {}
    if "title" in placeholders:
        fills["title"] = title
        fills["context"] = abstract
    elif "context" in placeholders:
        fills["context"] = f"{title}\n\n{abstract}"
    if "question" in placeholders:
        if question is None:
            raise InstantiationError(f"{template.id}: question required but missing")
        fills["question"] = question

    out = template.pattern
    for name in placeholders:
        marker = "{" + name + "}"
        if name not in fills:
            raise InstantiationError(f"{template.id}: placeholder {marker} unfilled")
        out = out.replace(marker, fills[name], 1)
    return out


def build_prompt_set(
    records: Sequence[AnnotatedRecord],
    templates: Sequence[Template],
    format: AnswerFormat,
    strategy: str = "single",
    subsample: float = 1.0,
    seed: int = 0,
) -> list[PromptInstance]:
    """Instantiate prompts with gold targets for a training/eval export.

    single pairs every record with the one given template; all/best cross
    records with every template and then subsample whole records (all of a
    record's instances are kept or dropped together) at the given fraction.
    """
    if not templates:
        raise SciexError("template list is empty")
    if strategy not in ("single", "all", "best"):
        raise SciexError(f"unknown strategy: {strategy!r}")
    if strategy == "single" and len(templates) != 1:
        raise SciexError("strategy=single requires exactly one template")
    if not (0 < subsample <= 1):
        raise SciexError(f"subsample must lie in (0,1], got {subsample}")

    chosen = list(records)
    if strategy != "single" and subsample < 1.0:
        k = int(len(chosen) * subsample + 0.5)
        rng = random.Random(f"{seed}|subsample")
        keep = set(rng.sample(range(len(chosen)), k))
        chosen = [r for i, r in enumerate(chosen) if i in keep]

    instances = []
    for record in chosen:
        for template in templates:
            prompt = instantiate(
                template,
                record.record.title,
                record.record.abstract,
                None if template.train_only else the_question(),
            )
            if template.train_only:
                target = the_question()
            elif not record.answerable:
                target = UNANSWERABLE
            else:
                target = serialize(list(record.contributions), format)
            instances.append(
                PromptInstance(
                    record_id=record.id,
                    template_id=str(template.id),
                    prompt=prompt,
                    target=target,
                    format=format,
                )
            )
    return instances


def includes_train_only(templates: Iterable[Template]) -> bool:
    return any(t.train_only for t in templates)
