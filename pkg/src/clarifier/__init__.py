"""Clarifying-question loop for LLM code generation.

Two model roles cooperate: a coder that writes and refines code, and a
communicator that inspects the task and the current code and asks
topic-tagged clarifying questions. Answers (from a human or a simulated
user) feed the next refinement. The package also ships a deterministic
scripted backend, a benchmark harness for blurred task descriptions, a
CLI, and an HTTP API.
"""

from clarifier.models import (
    Answer,
    ClarifyingQuestion,
    CodeRevision,
    ProblemDescription,
    QAExchange,
    QuestionTopic,
    SessionConfig,
    SessionTranscript,
    TerminationDecision,
    ValidationError,
)
from clarifier.session import SessionEngine, new_session, run_iteration, should_terminate

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "ClarifyingQuestion",
    "CodeRevision",
    "ProblemDescription",
    "QAExchange",
    "QuestionTopic",
    "SessionConfig",
    "SessionEngine",
    "SessionTranscript",
    "TerminationDecision",
    "ValidationError",
    "new_session",
    "run_iteration",
    "should_terminate",
]
