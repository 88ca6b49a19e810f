from __future__ import annotations

import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 fallback
    import tomli as tomllib

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from geobench.errors import ConfigError
from geobench.prompts import RenderedPrompt

logger = logging.getLogger(__name__)

MOCK_PREFIX = "mock:"
MOCK_KINDS = ("oracle", "noisy")


class ModelEndpoint(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    base_url: str
    model: str = ""
    adapter: Literal["chat-completions", "ollama"] = "chat-completions"
    auth_token_env: Optional[str] = None
    temperature: float = 0.0
    allow_nonzero_temperature: bool = False
    timeout: float = Field(60.0, gt=0)
    max_retries: int = Field(5, ge=0)
    requests_per_minute: int = Field(60, gt=0)
    max_in_flight: int = Field(4, gt=0)
    prompt_role: Literal["system", "user"] = "user"
    # mock:noisy parameters
    sigma_km: float = Field(10.0, ge=0)
    seed: int = 0

    @field_validator("name")
    @classmethod
    def _name(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("endpoint name must be non-empty")
        return value

    @field_validator("base_url")
    @classmethod
    def _base_url(cls, value: str) -> str:
        if value.startswith(MOCK_PREFIX):
            kind = value[len(MOCK_PREFIX):]
            if kind not in MOCK_KINDS:
                raise ValueError(f"unknown mock kind {kind!r}; expected one of {', '.join(MOCK_KINDS)}")
        elif not value.startswith(("http://", "https://")):
            raise ValueError("base_url must be an http(s) URL or mock:<kind>")
        return value

    @model_validator(mode="after")
    def _zero_temperature(self) -> "ModelEndpoint":
        if self.temperature != 0.0 and not self.allow_nonzero_temperature:
            raise ValueError(
                f"endpoint {self.name}: temperature must be 0.0 "
                "(set allow_nonzero_temperature = true to override)"
            )
        return self

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith(MOCK_PREFIX)

    @property
    def mock_kind(self) -> Optional[str]:
        return self.base_url[len(MOCK_PREFIX):] if self.is_mock else None


@dataclass(frozen=True)
class ModelReply:
    raw_text: str
    latency_ms: float
    attempt_count: int
    endpoint: str
    fingerprint: str
    cached: bool = False


def fingerprint(prompt: RenderedPrompt) -> str:
    h = hashlib.sha256()
    for part in (prompt.strategy_kind.value, prompt.text, prompt.image.id, prompt.image.image_uri):
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


def load_endpoints(path: str | Path, *, default_in_flight: Optional[int] = None) -> list[ModelEndpoint]:
    """Read `[[endpoints]]` entries from a TOML or JSON file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"endpoint config not found: {p}")
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(p.read_text(encoding="utf-8"))
        else:
            with p.open("rb") as handle:
                data = tomllib.load(handle)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse endpoint config {p}: {exc}") from exc

    entries = data.get("endpoints") if isinstance(data, dict) else None
    if not entries or not isinstance(entries, list):
        raise ConfigError(f"{p} must define a non-empty 'endpoints' list")

    endpoints: list[ModelEndpoint] = []
    for i, entry in enumerate(entries):
        if default_in_flight is not None and isinstance(entry, dict):
            entry = {"max_in_flight": default_in_flight, **entry}
        try:
            endpoints.append(ModelEndpoint.model_validate(entry))
        except ValidationError as exc:
            raise ConfigError(f"{p}: endpoint #{i + 1} is invalid: {exc}") from exc

    names = [e.name for e in endpoints]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError(f"{p}: duplicate endpoint names: {', '.join(dupes)}")
    for e in endpoints:
        if e.temperature != 0.0:
            logger.warning("Endpoint %s runs with temperature %s (override flag set)", e.name, e.temperature)
    return endpoints
