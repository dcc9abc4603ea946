"""Effective CLI configuration: defaults < config file < env < flags.

The config file is JSON with two optional sections::

    {
      "llm": {"base_url": ..., "model": ..., "temperature": ...,
              "timeout_seconds": ..., "max_retries": ..., "api_key": ...},
      "session": {"max_iterations": ..., "communication_level": ...,
                  "questions_per_round": ..., "stop_when_no_questions": ...,
                  "topic_priorities": {"Input Validation": 10, ...}}
    }

Environment: ``CLARIFIER_CONFIG`` points at the config file, ``LLM_API_KEY``
supplies the API key.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from clarifier.models import (
    CommunicationLevel,
    QuestionTopic,
    SessionConfig,
    ValidationError,
)


class ConfigError(ValidationError):
    """The config file is missing or malformed."""


@dataclass(frozen=True)
class LlmSettings:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    timeout_seconds: float = 60.0
    max_retries: int = 2
    api_key: Optional[str] = None


@dataclass(frozen=True)
class CliConfig:
    """Merged view of config file, environment, and flags."""

    llm: LlmSettings = field(default_factory=LlmSettings)
    session: SessionConfig = field(default_factory=SessionConfig)
    backend: str = "http"
    script: Optional[str] = None

    def dump(self) -> dict[str, Any]:
        """Printable effective config; the API key is masked."""
        return {
            "backend": self.backend,
            "script": self.script,
            "llm": {
                "base_url": self.llm.base_url,
                "model": self.llm.model,
                "temperature": self.llm.temperature,
                "timeout_seconds": self.llm.timeout_seconds,
                "max_retries": self.llm.max_retries,
                "api_key": "***" if self.llm.api_key else None,
            },
            "session": {
                "max_iterations": self.session.max_iterations,
                "communication_level": self.session.communication_level.value,
                "questions_per_round": self.session.questions_per_round,
                "stop_when_no_questions": self.session.stop_when_no_questions,
                "topic_priorities": {
                    topic.name: weight
                    for topic, weight in self.session.topic_priorities.items()
                },
            },
        }


def _read_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain an object")
    return data


def _llm_from_file(raw: Mapping[str, Any]) -> LlmSettings:
    settings = LlmSettings()
    known = {
        "base_url": str,
        "model": str,
        "temperature": (int, float),
        "timeout_seconds": (int, float),
        "max_retries": int,
        "api_key": str,
    }
    updates: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown llm config key: {key!r}")
        if not isinstance(value, known[key]) or isinstance(value, bool):
            raise ConfigError(f"llm config key {key!r} has the wrong type")
        updates[key] = float(value) if key in ("temperature", "timeout_seconds") else value
    return replace(settings, **updates)


def _session_from_file(raw: Mapping[str, Any], base: SessionConfig) -> SessionConfig:
    updates: dict[str, Any] = {}
    for key, value in raw.items():
        if key == "max_iterations":
            updates[key] = value
        elif key == "questions_per_round":
            updates[key] = value
        elif key == "stop_when_no_questions":
            updates[key] = value
        elif key == "communication_level":
            try:
                updates[key] = CommunicationLevel(value)
            except ValueError:
                raise ConfigError(
                    f"communication_level must be one of: "
                    f"{', '.join(m.value for m in CommunicationLevel)}"
                )
        elif key == "topic_priorities":
            if not isinstance(value, dict):
                raise ConfigError("topic_priorities must be an object")
            priorities = dict(base.topic_priorities)
            for name, weight in value.items():
                if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                    raise ConfigError(f"priority for {name!r} must be a number")
                priorities[QuestionTopic.from_name(name)] = float(weight)
            updates[key] = priorities
        else:
            raise ConfigError(f"unknown session config key: {key!r}")
    try:
        return replace(base, **updates)
    except (ValidationError, TypeError) as exc:
        raise ConfigError(f"invalid session config: {exc}")


def resolve_config(
    *,
    config_path: Optional[str] = None,
    env: Optional[Mapping[str, str]] = None,
    backend: Optional[str] = None,
    script: Optional[str] = None,
    max_iterations: Optional[int] = None,
    level: Optional[str] = None,
    questions: Optional[int] = None,
) -> CliConfig:
    """Merge config sources; flag arguments win over env over file."""
    env = os.environ if env is None else env

    path = config_path or env.get("CLARIFIER_CONFIG")
    llm = LlmSettings()
    session = SessionConfig()
    if path:
        data = _read_config_file(path)
        unknown = set(data) - {"llm", "session"}
        if unknown:
            raise ConfigError(
                f"unknown config section(s): {', '.join(sorted(unknown))}"
            )
        if "llm" in data:
            if not isinstance(data["llm"], dict):
                raise ConfigError('config section "llm" must be an object')
            llm = _llm_from_file(data["llm"])
        if "session" in data:
            if not isinstance(data["session"], dict):
                raise ConfigError('config section "session" must be an object')
            session = _session_from_file(data["session"], session)

    if env.get("LLM_API_KEY"):
        llm = replace(llm, api_key=env["LLM_API_KEY"])

    session_updates: dict[str, Any] = {}
    if max_iterations is not None:
        session_updates["max_iterations"] = max_iterations
    if questions is not None:
        session_updates["questions_per_round"] = questions
    if level is not None:
        try:
            session_updates["communication_level"] = CommunicationLevel(level)
        except ValueError:
            raise ConfigError(f"unknown communication level: {level!r}")
    if session_updates:
        try:
            session = replace(session, **session_updates)
        except ValidationError as exc:
            raise ConfigError(str(exc))

    return CliConfig(
        llm=llm,
        session=session,
        backend=backend or "http",
        script=script,
    )
