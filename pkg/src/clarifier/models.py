"""Domain types shared across the session loop, prompting, and the harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional


class ValidationError(ValueError):
    """Raised when a domain value violates its invariants."""


# The 15 canonical question topics, in the order a communicator typically
# covers them (validation and error handling first, broader context last).
CANONICAL_TOPIC_NAMES: tuple[str, ...] = (
    "Input Validation",
    "Error Handling",
    "Performance Requirements",
    "Function Signature",
    "Output Type",
    "Default Values",
    "Documentation",
    "Testing",
    "Language and Environment",
    "Algorithm Choice",
    "Usability and Extensibility",
    "Security Considerations",
    "Concurrency and Parallelism",
    "Version Control and Deployment",
    "Use Case and Context",
)


def _normalize_label(label: str) -> str:
    """Lowercase, drop punctuation, collapse whitespace."""
    cleaned = "".join(c if c.isalnum() else " " for c in label.lower())
    return " ".join(cleaned.split())


_CANONICAL_BY_NORMALIZED = {_normalize_label(name): name for name in CANONICAL_TOPIC_NAMES}


@dataclass(frozen=True)
class QuestionTopic:
    """A question category: one of the 15 canonical topics, or a free label.

    ``name`` is the display name. For canonical topics it is always the exact
    canonical spelling; for others it is the label as seen (trimmed).
    """

    name: str
    is_other: bool = False

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValidationError("topic name must be nonempty")
        if not self.is_other and self.name not in CANONICAL_TOPIC_NAMES:
            raise ValidationError(f"not a canonical topic name: {self.name!r}")

    @classmethod
    def other(cls, label: str) -> "QuestionTopic":
        return cls(name=label.strip(), is_other=True)

    @classmethod
    def from_name(cls, name: str) -> "QuestionTopic":
        """Rebuild a topic from its serialized display name."""
        if name in CANONICAL_TOPIC_NAMES:
            return cls(name=name)
        return cls.other(name)


CANONICAL_TOPICS: tuple[QuestionTopic, ...] = tuple(
    QuestionTopic(name) for name in CANONICAL_TOPIC_NAMES
)

TOPIC_OTHER_UNCATEGORIZED = QuestionTopic.other("uncategorized")


def default_topic_priorities() -> dict[QuestionTopic, float]:
    """Default ranking weights.

    Correctness-affecting topics come first (Input Validation, Error
    Handling, Output Type, Testing, Function Signature, Algorithm Choice),
    then the remaining topics in canonical order, with weights descending
    from 10 and flooring at 1. Unknown (``other``) topics default to 0.
    """
    ordered = [
        "Input Validation",
        "Error Handling",
        "Output Type",
        "Testing",
        "Function Signature",
        "Algorithm Choice",
    ]
    ordered += [name for name in CANONICAL_TOPIC_NAMES if name not in ordered]
    return {
        QuestionTopic(name): float(max(10 - i, 1)) for i, name in enumerate(ordered)
    }


@dataclass(frozen=True)
class ClarifyingQuestion:
    """One question emitted by the communicator.

    ``source_order`` is the question's position in the raw model output;
    ``score`` is assigned by ranking (0 until ranked).
    """

    topic: QuestionTopic
    text: str
    source_order: int
    score: float = 0.0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValidationError("question text must be nonempty")
        if self.source_order < 0:
            raise ValidationError("source_order must be nonnegative")
        if not math.isfinite(self.score):
            raise ValidationError("score must be finite")


class AnswerSourceKind(str, Enum):
    HUMAN = "human"
    SIMULATED = "simulated"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class Answer:
    """A user response to one clarifying question.

    ``question_ref`` addresses the question within its transcript (see
    :func:`question_ref`). Skipped answers carry empty text.
    """

    question_ref: str
    text: str
    source: AnswerSourceKind

    def __post_init__(self) -> None:
        if self.source == AnswerSourceKind.SKIPPED:
            if self.text:
                raise ValidationError("skipped answers must have empty text")
        elif not self.text:
            raise ValidationError("non-skipped answers must have nonempty text")

    @property
    def skipped(self) -> bool:
        return self.source == AnswerSourceKind.SKIPPED


@dataclass(frozen=True)
class PromptText:
    """A prompt plus its chat-message decomposition.

    Invariant: concatenating the message contents reproduces ``text``.
    """

    text: str
    role_messages: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if "".join(content for _, content in self.role_messages) != self.text:
            raise ValidationError("role_messages must concatenate to text")
        for role, _ in self.role_messages:
            if role not in ("system", "user"):
                raise ValidationError(f"unsupported prompt role: {role!r}")


@dataclass(frozen=True)
class ProblemDescription:
    """The coding task as stated by the user."""

    text: str
    source_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValidationError("problem description must be nonempty")


@dataclass(frozen=True)
class CodeRevision:
    """One generation of code, with the byte-exact prompt that produced it."""

    iteration: int
    code: str
    coder_prompt: str
    language_hint: Optional[str] = None

    def __post_init__(self) -> None:
        if self.iteration < 0:
            raise ValidationError("iteration must be nonnegative")


@dataclass
class QAExchange:
    """A question asked at some iteration, possibly answered.

    ``answer`` is None while the question is still pending.
    ``asked_at_iteration`` is the revision the answer will inform: questions
    asked after revision k carry asked_at_iteration k+1.
    """

    question: ClarifyingQuestion
    asked_at_iteration: int
    answer: Optional[Answer] = None

    def __post_init__(self) -> None:
        if self.asked_at_iteration < 0:
            raise ValidationError("asked_at_iteration must be nonnegative")

    @property
    def ref(self) -> str:
        return question_ref(self.asked_at_iteration, self.question.source_order)


def question_ref(asked_at_iteration: int, source_order: int) -> str:
    """Stable identifier of a question within one transcript."""
    return f"q{asked_at_iteration}.{source_order}"


class CommunicationLevel(str, Enum):
    UNDER = "under"
    EFFECTIVE = "effective"
    OVER = "over"


@dataclass(frozen=True)
class SessionConfig:
    """Loop controls: iteration budget, how many questions to ask, weights."""

    max_iterations: int = 3
    communication_level: CommunicationLevel = CommunicationLevel.EFFECTIVE
    questions_per_round: int = 3
    topic_priorities: dict[QuestionTopic, float] = field(
        default_factory=default_topic_priorities
    )
    stop_when_no_questions: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.questions_per_round < 1:
            raise ValidationError("questions_per_round must be >= 1")
        for topic, weight in self.topic_priorities.items():
            if not math.isfinite(weight) or weight < 0:
                raise ValidationError(
                    f"priority for {topic.name!r} must be finite and >= 0"
                )

    # dicts are unhashable; configs are compared, never hashed
    __hash__ = None  # type: ignore[assignment]


class SessionStatus(str, Enum):
    ACTIVE = "active"
    DONE_MAX_ITERATIONS = "done_max_iterations"
    DONE_NO_QUESTIONS = "done_no_questions"
    DONE_USER_STOP = "done_user_stop"
    FAILED = "failed"

    @property
    def terminal(self) -> bool:
        return self != SessionStatus.ACTIVE


class StopReason(str, Enum):
    MAX_ITERATIONS = "max_iterations"
    NO_QUESTIONS = "no_questions"
    USER_STOP = "user_stop"
    NONE = "none"


@dataclass(frozen=True)
class TerminationDecision:
    stop: bool
    reason: StopReason

    def __post_init__(self) -> None:
        if not self.stop and self.reason != StopReason.NONE:
            raise ValidationError("a non-stop decision must carry reason 'none'")


def now_utc() -> datetime:
    """Current UTC time at second precision (transcript timestamps)."""
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass
class SessionTranscript:
    """Complete record of one clarification session."""

    description: ProblemDescription
    config_snapshot: SessionConfig
    revisions: list[CodeRevision] = field(default_factory=list)
    exchanges: list[QAExchange] = field(default_factory=list)
    status: SessionStatus = SessionStatus.ACTIVE
    created_at: datetime = field(default_factory=now_utc)
    updated_at: datetime = field(default_factory=now_utc)

    def validate(self) -> None:
        """Check cross-field invariants; raises ValidationError."""
        for i, rev in enumerate(self.revisions):
            if rev.iteration != i:
                raise ValidationError(
                    f"revision iterations must be 0..N with no gaps; "
                    f"got {rev.iteration} at position {i}"
                )
        latest = len(self.revisions) - 1
        for exch in self.exchanges:
            if exch.asked_at_iteration > latest + 1:
                raise ValidationError(
                    f"exchange asked_at_iteration {exch.asked_at_iteration} exceeds "
                    f"latest revision iteration + 1 ({latest + 1})"
                )
            if exch.answer is not None and exch.answer.question_ref != exch.ref:
                raise ValidationError(
                    f"answer question_ref {exch.answer.question_ref!r} does not match "
                    f"its exchange ({exch.ref!r})"
                )
        if self.status.terminal and self.status != SessionStatus.FAILED:
            if not self.revisions:
                raise ValidationError(
                    f"status {self.status.value} requires at least one revision"
                )

    def pending_exchanges(self) -> list[QAExchange]:
        return [e for e in self.exchanges if e.answer is None]

    def answered_exchanges(self) -> list[QAExchange]:
        """Exchanges with a real (non-skipped) answer, in ask order."""
        return [e for e in self.exchanges if e.answer is not None and not e.answer.skipped]

    def touch(self) -> None:
        self.updated_at = now_utc()
