import json

import pytest

from geobench.errors import TemplateError
from geobench.prompts import (
    ANSWER_LABEL,
    PromptStrategy,
    StrategyKind,
    cot_steps,
    data_generation_strategy,
    export_finetune,
    make_finetune_record,
    render,
)
from geobench.prompts.engine import substitute
from geobench.parser import parse_coordinates


def test_zero_shot_text(make_record):
    prompt = render(PromptStrategy(StrategyKind.ZERO_SHOT), make_record())
    assert prompt.text.startswith("You are recognized as the world’s foremost expert in geolocation analysis.")
    assert "latitude and longitude coordinates with precision" in prompt.text
    assert prompt.strategy_kind is StrategyKind.ZERO_SHOT


def test_few_shot_carries_both_worked_examples(make_record):
    text = render(PromptStrategy(StrategyKind.FEW_SHOT), make_record()).text
    assert "Latitude and Longitude: -38.6633, 143.1051" in text
    assert "Latitude and Longitude: 51.5007, -0.1246" in text
    assert text.index("Twelve Apostles") < text.index("Elizabeth Tower")


def test_cot_optionally_appends_numbered_steps(make_record):
    plain = render(PromptStrategy(StrategyKind.CHAIN_OF_THOUGHT), make_record()).text
    stepped = render(PromptStrategy.named("cot", with_steps=True), make_record()).text
    assert "pinpoint the exact geolocation" in plain
    assert stepped.startswith(plain)
    steps = cot_steps()
    assert len(steps) == 5
    assert steps[0].startswith("Identify the Google car model")
    assert f"\n1. {steps[0]}" in stepped
    assert stepped.endswith(f"5. {steps[4]}")


def test_strategy_names():
    assert StrategyKind.from_name("Chain_of_Thought") is StrategyKind.CHAIN_OF_THOUGHT
    assert StrategyKind.from_name("fewshot") is StrategyKind.FEW_SHOT
    with pytest.raises(ValueError, match="unknown prompt strategy"):
        StrategyKind.from_name("tree-of-thought")


def test_data_generation_substitutes_address_and_coordinates(make_record):
    record = make_record("r", -33.8568, 151.2153, country="AU", address="Sydney Opera House")
    text = render(data_generation_strategy(record), record).text
    assert "if the place is Sydney Opera House, with coordinates -33.8568, 151.2153, explain" in text
    assert "{" not in text


def test_data_generation_requires_parameters():
    with pytest.raises(TemplateError, match="missing parameters: address, lat"):
        PromptStrategy(StrategyKind.COT_DATA_GENERATION, {"lon": 1.0})
    with pytest.raises(TemplateError, match="not a valid coordinate"):
        PromptStrategy(StrategyKind.COT_DATA_GENERATION, {"address": "x", "lat": 120.0, "lon": 0.0})


def test_data_generation_falls_back_to_country(make_record):
    strategy = data_generation_strategy(make_record(country="JP"))
    assert strategy.parameters["address"] == "a location in JP"


def test_substitute():
    assert substitute("at {place} ({lat, lon})", {"place": "X", "lat": 1.5, "lon": -2.0}) == "at X (1.5, -2)"
    with pytest.raises(TemplateError, match="missing value"):
        substitute("{nope}", {})


def test_finetune_target_parses_back_to_truth(make_record, tmp_path):
    record = make_record("t", 51.5007, -0.1246, country="GB")
    ft = make_finetune_record(record, "  Red buses and a gothic clock tower.\n")
    assert ft.target_text == f"Red buses and a gothic clock tower.\n{ANSWER_LABEL}51.5007, -0.1246"
    assert ft.prompt_text == render(PromptStrategy(StrategyKind.CHAIN_OF_THOUGHT), record).text
    assert parse_coordinates(ft.target_text).coordinate == record.truth

    path = tmp_path / "ft.jsonl"
    assert export_finetune(path, [ft]) == 1
    line = json.loads(path.read_text(encoding="utf-8"))
    assert line == {"image_uri": record.image_uri, "prompt": ft.prompt_text, "target": ft.target_text}

    with pytest.raises(ValueError):
        make_finetune_record(record, "   ")
