from .engine import (
    ANSWER_LABEL,
    EVALUATION_KINDS,
    FineTuneRecord,
    PromptStrategy,
    RenderedPrompt,
    StrategyKind,
    cot_steps,
    data_generation_strategy,
    export_finetune,
    make_finetune_record,
    render,
)

__all__ = [
    "ANSWER_LABEL",
    "EVALUATION_KINDS",
    "FineTuneRecord",
    "PromptStrategy",
    "RenderedPrompt",
    "StrategyKind",
    "cot_steps",
    "data_generation_strategy",
    "export_finetune",
    "make_finetune_record",
    "render",
]
