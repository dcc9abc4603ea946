"""A rule-based stand-in for the human during benchmark runs.

The simulated user owns a hidden specification: facts the blurred task
description deliberately leaves out. Asked the right question, it reveals
the matching fact; asked anything else, it answers with a neutral default.
Keyword rules win over topic facts because question wording is more
specific than a topic tag.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from clarifier.models import (
    Answer,
    AnswerSourceKind,
    ClarifyingQuestion,
    QuestionTopic,
    ValidationError,
)

DEFAULT_ANSWER = "No preference; use your best judgment."


@dataclass(frozen=True)
class KeywordRule:
    """Answer with ``answer`` when the question text matches ``pattern``.

    Patterns are case-insensitive substrings unless ``regex`` is set.
    """

    pattern: str
    answer: str
    regex: bool = False

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValidationError("keyword rule pattern must be nonempty")
        if not self.answer.strip():
            raise ValidationError("keyword rule answer must be nonempty")
        if self.regex:
            try:
                re.compile(self.pattern)
            except re.error as exc:
                raise ValidationError(
                    f"invalid keyword rule regex {self.pattern!r}: {exc}"
                )

    def matches(self, text: str) -> bool:
        if self.regex:
            return re.search(self.pattern, text, re.IGNORECASE) is not None
        return self.pattern.lower() in text.lower()


@dataclass(frozen=True)
class HiddenSpec:
    """The oracle-only requirements for one benchmark task."""

    facts: dict[QuestionTopic, str] = field(default_factory=dict)
    keyword_rules: tuple[KeywordRule, ...] = ()
    default_answer: str = DEFAULT_ANSWER

    def __post_init__(self) -> None:
        for topic, fact in self.facts.items():
            if not fact.strip():
                raise ValidationError(f"fact for topic {topic.name!r} must be nonempty")
        if not self.default_answer.strip():
            raise ValidationError("default_answer must be nonempty")

    def hidden_strings(self) -> list[str]:
        """Every string that must never leak into a no-clarification run."""
        return list(self.facts.values()) + [rule.answer for rule in self.keyword_rules]

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "HiddenSpec":
        facts = {
            QuestionTopic.from_name(name): text
            for name, text in raw.get("facts", {}).items()
        }
        rules = tuple(
            KeywordRule(
                pattern=item["pattern"],
                answer=item["answer"],
                regex=bool(item.get("regex", False)),
            )
            for item in raw.get("keyword_rules", [])
        )
        return cls(
            facts=facts,
            keyword_rules=rules,
            default_answer=raw.get("default_answer", DEFAULT_ANSWER),
        )


def answer_question(
    question: ClarifyingQuestion, spec: HiddenSpec, *, question_ref: str = ""
) -> Answer:
    """Deterministically answer one question from the hidden spec.

    The first matching keyword rule wins, then the fact for the question's
    topic, then the default answer.
    """
    for rule in spec.keyword_rules:
        if rule.matches(question.text):
            return Answer(
                question_ref=question_ref,
                text=rule.answer,
                source=AnswerSourceKind.SIMULATED,
            )
    fact = spec.facts.get(question.topic)
    if fact is not None:
        return Answer(
            question_ref=question_ref, text=fact, source=AnswerSourceKind.SIMULATED
        )
    return Answer(
        question_ref=question_ref,
        text=spec.default_answer,
        source=AnswerSourceKind.SIMULATED,
    )


@dataclass(frozen=True)
class SimulatedUserSource:
    """AnswerSource adapter so sessions can run against a hidden spec."""

    spec: HiddenSpec

    def answer(self, ref: str, question: ClarifyingQuestion) -> Answer:
        return answer_question(question, self.spec, question_ref=ref)
