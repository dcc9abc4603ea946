"""Transcript documents: a versioned JSON schema for saved sessions.

Top-level fields: ``schema_version`` (currently 1), ``description``,
``config``, ``revisions``, ``exchanges``, ``status``, ``created_at``,
``updated_at``. Timestamps are UTC at second precision
(``YYYY-MM-DDTHH:MM:SSZ``); topics serialize as their display names.
``load_transcript(save_transcript(t))`` reproduces ``t`` exactly, byte-exact
on code and prompts.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from clarifier.models import (
    Answer,
    AnswerSourceKind,
    ClarifyingQuestion,
    CodeRevision,
    CommunicationLevel,
    ProblemDescription,
    QAExchange,
    QuestionTopic,
    SessionConfig,
    SessionStatus,
    SessionTranscript,
    ValidationError,
)

SCHEMA_VERSION = 1

_TIME_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class TranscriptFormatError(ValidationError):
    """A transcript document is malformed; ``location`` points at the issue."""

    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{message} (at {location})")
        self.location = location


def _format_time(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime(_TIME_FORMAT)


def _parse_time(value: Any, location: str) -> datetime:
    if not isinstance(value, str):
        raise TranscriptFormatError("timestamp must be a string", location)
    try:
        return datetime.strptime(value, _TIME_FORMAT).replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise TranscriptFormatError(f"bad timestamp {value!r}: {exc}", location)


def to_document(session: SessionTranscript) -> dict[str, Any]:
    """Transcript as a JSON-ready dict with fixed field order."""
    return {
        "schema_version": SCHEMA_VERSION,
        "description": {
            "text": session.description.text,
            "source_id": session.description.source_id,
        },
        "config": {
            "max_iterations": session.config_snapshot.max_iterations,
            "communication_level": session.config_snapshot.communication_level.value,
            "questions_per_round": session.config_snapshot.questions_per_round,
            "topic_priorities": {
                topic.name: weight
                for topic, weight in session.config_snapshot.topic_priorities.items()
            },
            "stop_when_no_questions": session.config_snapshot.stop_when_no_questions,
        },
        "revisions": [
            {
                "iteration": rev.iteration,
                "code": rev.code,
                "language_hint": rev.language_hint,
                "coder_prompt": rev.coder_prompt,
            }
            for rev in session.revisions
        ],
        "exchanges": [
            {
                "question": {
                    "topic": exch.question.topic.name,
                    "text": exch.question.text,
                    "source_order": exch.question.source_order,
                    "score": exch.question.score,
                },
                "answer": (
                    None
                    if exch.answer is None
                    else {
                        "question_ref": exch.answer.question_ref,
                        "text": exch.answer.text,
                        "source": exch.answer.source.value,
                    }
                ),
                "asked_at_iteration": exch.asked_at_iteration,
            }
            for exch in session.exchanges
        ],
        "status": session.status.value,
        "created_at": _format_time(session.created_at),
        "updated_at": _format_time(session.updated_at),
    }


def save_transcript(session: SessionTranscript) -> bytes:
    """Serialize to UTF-8 JSON; deterministic for equal transcripts."""
    return (json.dumps(to_document(session), indent=2, ensure_ascii=False) + "\n").encode(
        "utf-8"
    )


def save_transcript_file(session: SessionTranscript, path: str | Path) -> None:
    Path(path).write_bytes(save_transcript(session))


def _expect(obj: Any, key: str, kind: type, location: str, optional: bool = False) -> Any:
    if not isinstance(obj, dict):
        raise TranscriptFormatError("expected an object", location)
    if key not in obj:
        if optional:
            return None
        raise TranscriptFormatError(f"missing required field {key!r}", location)
    value = obj[key]
    if value is None and optional:
        return None
    # bool is an int subclass; keep the two apart
    if kind is int and isinstance(value, bool):
        raise TranscriptFormatError(f"field {key!r} must be an integer", f"{location}.{key}")
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind):
        raise TranscriptFormatError(
            f"field {key!r} must be of type {kind.__name__}", f"{location}.{key}"
        )
    return value


def _enum_value(enum_cls: type, raw: str, location: str) -> Any:
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)  # type: ignore[attr-defined]
        raise TranscriptFormatError(
            f"{raw!r} is not one of: {allowed}", location
        ) from None


def _load_question(raw: Any, location: str) -> ClarifyingQuestion:
    topic_name = _expect(raw, "topic", str, location)
    text = _expect(raw, "text", str, location)
    source_order = _expect(raw, "source_order", int, location)
    score = _expect(raw, "score", float, location)
    try:
        return ClarifyingQuestion(
            topic=QuestionTopic.from_name(topic_name),
            text=text,
            source_order=source_order,
            score=float(score),
        )
    except ValidationError as exc:
        raise TranscriptFormatError(str(exc), location)


def _load_answer(raw: Any, location: str) -> Answer:
    ref = _expect(raw, "question_ref", str, location)
    text = _expect(raw, "text", str, location)
    source = _enum_value(
        AnswerSourceKind, _expect(raw, "source", str, location), f"{location}.source"
    )
    try:
        return Answer(question_ref=ref, text=text, source=source)
    except ValidationError as exc:
        raise TranscriptFormatError(str(exc), location)


def _load_config(raw: Any, location: str) -> SessionConfig:
    level = _enum_value(
        CommunicationLevel,
        _expect(raw, "communication_level", str, location),
        f"{location}.communication_level",
    )
    priorities_raw = _expect(raw, "topic_priorities", dict, location)
    priorities: dict[QuestionTopic, float] = {}
    for name, weight in priorities_raw.items():
        if isinstance(weight, bool) or not isinstance(weight, (int, float)):
            raise TranscriptFormatError(
                f"priority for {name!r} must be a number",
                f"{location}.topic_priorities",
            )
        priorities[QuestionTopic.from_name(name)] = float(weight)
    try:
        return SessionConfig(
            max_iterations=_expect(raw, "max_iterations", int, location),
            communication_level=level,
            questions_per_round=_expect(raw, "questions_per_round", int, location),
            topic_priorities=priorities,
            stop_when_no_questions=_expect(raw, "stop_when_no_questions", bool, location),
        )
    except ValidationError as exc:
        raise TranscriptFormatError(str(exc), location)


def from_document(doc: Any) -> SessionTranscript:
    """Build a transcript from a parsed document, validating invariants."""
    if not isinstance(doc, dict):
        raise TranscriptFormatError("transcript document must be an object")
    version = _expect(doc, "schema_version", int, "$")
    if version != SCHEMA_VERSION:
        raise TranscriptFormatError(
            f"unsupported schema_version {version} (supported: {SCHEMA_VERSION})",
            "$.schema_version",
        )
    known = {
        "schema_version",
        "description",
        "config",
        "revisions",
        "exchanges",
        "status",
        "created_at",
        "updated_at",
    }
    unknown = set(doc) - known
    if unknown:
        raise TranscriptFormatError(
            f"unknown field(s): {', '.join(sorted(unknown))}"
        )

    desc_raw = _expect(doc, "description", dict, "$")
    try:
        description = ProblemDescription(
            text=_expect(desc_raw, "text", str, "$.description"),
            source_id=_expect(desc_raw, "source_id", str, "$.description", optional=True),
        )
    except ValidationError as exc:
        raise TranscriptFormatError(str(exc), "$.description")

    config = _load_config(_expect(doc, "config", dict, "$"), "$.config")

    revisions: list[CodeRevision] = []
    for i, raw in enumerate(_expect(doc, "revisions", list, "$")):
        location = f"$.revisions[{i}]"
        try:
            revisions.append(
                CodeRevision(
                    iteration=_expect(raw, "iteration", int, location),
                    code=_expect(raw, "code", str, location),
                    coder_prompt=_expect(raw, "coder_prompt", str, location),
                    language_hint=_expect(
                        raw, "language_hint", str, location, optional=True
                    ),
                )
            )
        except ValidationError as exc:
            raise TranscriptFormatError(str(exc), location)

    exchanges: list[QAExchange] = []
    for i, raw in enumerate(_expect(doc, "exchanges", list, "$")):
        location = f"$.exchanges[{i}]"
        question = _load_question(
            _expect(raw, "question", dict, location), f"{location}.question"
        )
        answer_raw = _expect(raw, "answer", dict, location, optional=True)
        answer = (
            None
            if answer_raw is None
            else _load_answer(answer_raw, f"{location}.answer")
        )
        exchanges.append(
            QAExchange(
                question=question,
                asked_at_iteration=_expect(raw, "asked_at_iteration", int, location),
                answer=answer,
            )
        )

    status = _enum_value(
        SessionStatus, _expect(doc, "status", str, "$"), "$.status"
    )
    session = SessionTranscript(
        description=description,
        config_snapshot=config,
        revisions=revisions,
        exchanges=exchanges,
        status=status,
        created_at=_parse_time(doc.get("created_at"), "$.created_at"),
        updated_at=_parse_time(doc.get("updated_at"), "$.updated_at"),
    )
    try:
        session.validate()
    except ValidationError as exc:
        raise TranscriptFormatError(str(exc))
    return session


def load_transcript(data: bytes | str) -> SessionTranscript:
    """Parse and validate a transcript document."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TranscriptFormatError(f"not valid UTF-8: {exc}")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise TranscriptFormatError(f"not valid JSON: {exc}")
    return from_document(doc)


def load_transcript_file(path: str | Path) -> SessionTranscript:
    path = Path(path)
    if not path.is_file():
        raise TranscriptFormatError(f"transcript file not found: {path}")
    return load_transcript(path.read_bytes())


def strip_timestamps(doc: dict[str, Any]) -> dict[str, Any]:
    """Copy of a transcript document without created_at/updated_at, for
    determinism comparisons."""
    return {k: v for k, v in doc.items() if k not in ("created_at", "updated_at")}
