"""Prompt families used for evaluation and fine-tune data generation.

Template text lives in ``templates/`` and is pinned by SHA-256 so any drift
in wording fails loudly at load time.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

from geobench.dataset.records import ImageRecord
from geobench.errors import TemplateError
from geobench.metrics import GeoCoordinate, format_coordinate, format_degrees

logger = logging.getLogger(__name__)

ANSWER_LABEL = "Latitude and Longitude: "

_PLACEHOLDER_RE = re.compile(r"\{\s*([A-Za-z_]\w*(?:\s*,\s*[A-Za-z_]\w*)*)\s*\}")


class StrategyKind(str, Enum):
    ZERO_SHOT = "zero-shot"
    FEW_SHOT = "few-shot"
    CHAIN_OF_THOUGHT = "cot"
    COT_DATA_GENERATION = "cot-data"

    @classmethod
    def from_name(cls, name: str) -> "StrategyKind":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "zero-shot": cls.ZERO_SHOT,
            "zeroshot": cls.ZERO_SHOT,
            "few-shot": cls.FEW_SHOT,
            "fewshot": cls.FEW_SHOT,
            "cot": cls.CHAIN_OF_THOUGHT,
            "chain-of-thought": cls.CHAIN_OF_THOUGHT,
            "cot-data": cls.COT_DATA_GENERATION,
            "cot-data-generation": cls.COT_DATA_GENERATION,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown prompt strategy {name!r}") from None

    @property
    def label(self) -> str:
        return {
            StrategyKind.ZERO_SHOT: "Zero-shot",
            StrategyKind.FEW_SHOT: "Few-shot",
            StrategyKind.CHAIN_OF_THOUGHT: "Chain-of-thought",
            StrategyKind.COT_DATA_GENERATION: "CoT data generation",
        }[self]


_TEMPLATE_FILES = {
    StrategyKind.ZERO_SHOT: "zero_shot.txt",
    StrategyKind.FEW_SHOT: "few_shot.txt",
    StrategyKind.CHAIN_OF_THOUGHT: "chain_of_thought.txt",
    StrategyKind.COT_DATA_GENERATION: "cot_data_generation.txt",
}
_STEPS_FILE = "cot_steps.txt"

TEMPLATE_SHA256 = {
    "zero_shot.txt": "b0214541ca1e910698f99891ae67a4b13bb07e3061e497582beb9f703f899f8f",
    "few_shot.txt": "0f3f608bcdf3d82054fde9649ca76161284403f6ef00d3ecb18ee5ffd6bbd5df",
    "chain_of_thought.txt": "bed116261dde63ae8f17bfec191f7b5303dc9b97feb7b8dd91622047874e0c08",
    "cot_data_generation.txt": "3460658b9758f34aba000a44659eedd198ba2f4d87f0c0fd573ad9eed949c106",
    "cot_steps.txt": "6e7547ed640081e78d87d00503ef70d75e2d36ea0b2f216b6f0e078d7ff2085c",
}

REQUIRED_PARAMETERS: dict[StrategyKind, frozenset[str]] = {
    StrategyKind.ZERO_SHOT: frozenset(),
    StrategyKind.FEW_SHOT: frozenset(),
    StrategyKind.CHAIN_OF_THOUGHT: frozenset(),
    StrategyKind.COT_DATA_GENERATION: frozenset({"address", "lat", "lon"}),
}

EVALUATION_KINDS = (StrategyKind.ZERO_SHOT, StrategyKind.FEW_SHOT, StrategyKind.CHAIN_OF_THOUGHT)


def _read_asset(name: str) -> bytes:
    return resources.files("geobench.prompts").joinpath("templates").joinpath(name).read_bytes()


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    raw = _read_asset(name)
    digest = hashlib.sha256(raw).hexdigest()
    expected = TEMPLATE_SHA256.get(name)
    if expected is None:
        raise TemplateError(f"unregistered template {name}")
    if digest != expected:
        raise TemplateError(f"template {name} drifted from its canonical text (sha256 {digest})")
    return raw.decode("utf-8").rstrip("\n")


def cot_steps() -> list[str]:
    return load_template(_STEPS_FILE).split("\n")


@dataclass(frozen=True)
class PromptStrategy:
    kind: StrategyKind
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        missing = REQUIRED_PARAMETERS[self.kind] - set(self.parameters)
        if missing:
            raise TemplateError(f"{self.kind.value} prompt is missing parameters: {', '.join(sorted(missing))}")
        if {"lat", "lon"} <= set(self.parameters):
            try:
                GeoCoordinate(float(self.parameters["lat"]), float(self.parameters["lon"]))
            except (TypeError, ValueError) as exc:
                raise TemplateError(f"lat/lon parameters are not a valid coordinate: {exc}") from exc

    @classmethod
    def named(cls, name: str, **parameters: Any) -> "PromptStrategy":
        return cls(StrategyKind.from_name(name), parameters)


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    image: ImageRecord
    strategy_kind: StrategyKind


def _format_value(name: str, value: Any) -> str:
    if name in ("lat", "lon"):
        return format_degrees(float(value))
    return str(value)


def substitute(template: str, parameters: Mapping[str, Any]) -> str:
    """Replace {name} and {a, b} markers; a grouped marker renders as "a, b"."""

    def repl(match: re.Match[str]) -> str:
        names = [n.strip() for n in match.group(1).split(",")]
        missing = [n for n in names if n not in parameters]
        if missing:
            raise TemplateError(f"missing value for placeholder {{{match.group(1)}}}")
        return ", ".join(_format_value(n, parameters[n]) for n in names)

    text = _PLACEHOLDER_RE.sub(repl, template)
    leftover = _PLACEHOLDER_RE.search(text)
    if leftover:
        raise TemplateError(f"unresolved placeholder {leftover.group(0)}")
    return text


def _numbered(steps: Iterable[str]) -> str:
    return "\n".join(f"{i}. {step}" for i, step in enumerate(steps, start=1))


def render(strategy: PromptStrategy, image: ImageRecord) -> RenderedPrompt:
    try:
        filename = _TEMPLATE_FILES[strategy.kind]
    except KeyError:
        raise TemplateError(f"unknown prompt kind {strategy.kind!r}") from None
    text = substitute(load_template(filename), strategy.parameters)
    if strategy.kind is StrategyKind.CHAIN_OF_THOUGHT and strategy.parameters.get("with_steps"):
        text = f"{text}\n\nWork through these steps in order:\n{_numbered(cot_steps())}"
    if not text.strip():
        raise TemplateError("rendered prompt is empty")
    return RenderedPrompt(text=text, image=image, strategy_kind=strategy.kind)


def data_generation_strategy(record: ImageRecord) -> PromptStrategy:
    address = record.address or f"a location in {record.country_code}"
    return PromptStrategy(
        StrategyKind.COT_DATA_GENERATION,
        {"address": address, "lat": record.truth.latitude, "lon": record.truth.longitude},
    )


@dataclass(frozen=True)
class FineTuneRecord:
    image_uri: str
    prompt_text: str
    target_text: str
    truth: GeoCoordinate

    def to_json(self) -> str:
        return json.dumps(
            {"image_uri": self.image_uri, "prompt": self.prompt_text, "target": self.target_text},
            ensure_ascii=False,
        )


def make_finetune_record(
    record: ImageRecord,
    generated_description: str,
    prompt_text: Optional[str] = None,
) -> FineTuneRecord:
    """Pair a generated description with the ground truth as a training target.

    The training prompt defaults to the chain-of-thought evaluation prompt.
    """
    description = generated_description.strip()
    if not description:
        raise ValueError("generated description must be non-empty")
    if prompt_text is None:
        prompt_text = render(PromptStrategy(StrategyKind.CHAIN_OF_THOUGHT), record).text
    target = f"{description}\n{ANSWER_LABEL}{format_coordinate(record.truth)}"
    return FineTuneRecord(record.image_uri, prompt_text, target, record.truth)


def export_finetune(path: str | Path, records: Iterable[FineTuneRecord]) -> int:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out.open("w", encoding="utf-8", newline="\n") as handle:
        for rec in records:
            handle.write(rec.to_json() + "\n")
            count += 1
    logger.info("Wrote %d fine-tune records to %s", count, out)
    return count
