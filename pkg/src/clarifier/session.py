"""The clarification session loop.

One iteration runs coder -> communicator -> user: the coder produces a
revision from the description plus every answer gathered so far, the
communicator proposes clarifying questions about it, and an answer source
(a human at a terminal, an API client, or a simulated user) resolves the
selected questions before the next refinement.

Iterations are all-or-nothing: a backend failure leaves the transcript
exactly as it was.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol

from clarifier.backend import Backend, RequestSettings
from clarifier.models import (
    Answer,
    AnswerSourceKind,
    ClarifyingQuestion,
    CodeRevision,
    ProblemDescription,
    QAExchange,
    SessionConfig,
    SessionStatus,
    SessionTranscript,
    StopReason,
    TerminationDecision,
    ValidationError,
)
from clarifier.prompting import (
    build_coder_prompt,
    build_communicator_prompt,
    extract_code,
    parse_question_list,
    rank_and_select,
)


class SessionStateError(RuntimeError):
    """An operation was attempted in a session state that forbids it."""


class UnknownQuestionRef(ValidationError):
    """An answer referenced a question that is not pending."""


class UserStopRequested(Exception):
    """Raised by an answer source when the user ends the session."""


class AnswerSource(Protocol):
    """Produces an answer for one pending question.

    Implementations may raise :class:`UserStopRequested` to end the
    session instead of answering.
    """

    def answer(self, ref: str, question: ClarifyingQuestion) -> Answer: ...


@dataclass
class ScriptedAnswerSource:
    """Replays a fixed list of reply lines, mirroring the terminal rules:
    an empty string skips the question, ``/stop`` ends the session."""

    replies: list[str]
    cursor: int = 0

    def answer(self, ref: str, question: ClarifyingQuestion) -> Answer:
        if self.cursor >= len(self.replies):
            raise UserStopRequested("scripted answers exhausted")
        reply = self.replies[self.cursor]
        self.cursor += 1
        if reply.strip() == "/stop":
            raise UserStopRequested("scripted stop")
        if not reply.strip():
            return Answer(question_ref=ref, text="", source=AnswerSourceKind.SKIPPED)
        return Answer(question_ref=ref, text=reply, source=AnswerSourceKind.HUMAN)


def new_session(desc: ProblemDescription, config: SessionConfig) -> SessionTranscript:
    """Open a transcript for a fresh session; nothing has run yet."""
    return SessionTranscript(description=desc, config_snapshot=config)


def should_terminate(
    session: SessionTranscript, config: SessionConfig, selected_question_count: int
) -> TerminationDecision:
    """Decide whether the loop stops after the current iteration.

    The iteration budget is checked first; running out of questions only
    stops the loop when the config says so.
    """
    return _terminate_for(len(session.revisions), config, selected_question_count)


def _terminate_for(
    revision_count: int, config: SessionConfig, selected_question_count: int
) -> TerminationDecision:
    if revision_count >= config.max_iterations:
        return TerminationDecision(stop=True, reason=StopReason.MAX_ITERATIONS)
    if selected_question_count == 0 and config.stop_when_no_questions:
        return TerminationDecision(stop=True, reason=StopReason.NO_QUESTIONS)
    return TerminationDecision(stop=False, reason=StopReason.NONE)


@dataclass
class SessionEngine:
    """Drives one session against a coder and a communicator backend.

    ``advance`` generates the next revision and records the next round of
    pending questions; ``record_answers`` fills them in. The blocking
    :func:`run_iteration` composes the two; the HTTP service calls them
    separately so answers can arrive over the wire.
    """

    coder: Backend
    communicator: Backend
    settings: RequestSettings = field(default_factory=RequestSettings)

    def advance(self, session: SessionTranscript) -> list[QAExchange]:
        """Run one generation step; returns newly pending exchanges.

        The returned list is empty when the session terminated (budget
        exhausted or the communicator found nothing to ask). No state is
        mutated if a backend call or code extraction fails.
        """
        if session.status != SessionStatus.ACTIVE:
            raise SessionStateError(
                f"cannot advance a session with status {session.status.value}"
            )
        if session.pending_exchanges():
            raise SessionStateError(
                "pending questions must be answered or skipped before advancing"
            )
        config = session.config_snapshot
        iteration = len(session.revisions)
        prev = session.revisions[-1] if session.revisions else None

        coder_prompt = build_coder_prompt(
            session.description, session.answered_exchanges(), prev
        )
        coder_response = self.coder.complete(self.settings.request_for(coder_prompt))
        code, hint = extract_code(coder_response.content)
        revision = CodeRevision(
            iteration=iteration,
            code=code,
            coder_prompt=coder_prompt.text,
            language_hint=hint,
        )

        # Budget check first: the final allowed revision skips the
        # communicator entirely.
        if _terminate_for(iteration + 1, config, selected_question_count=1).stop:
            session.revisions.append(revision)
            session.status = SessionStatus.DONE_MAX_ITERATIONS
            session.touch()
            return []

        communicator_prompt = build_communicator_prompt(session.description, revision)
        raw = self.communicator.complete(
            self.settings.request_for(communicator_prompt)
        ).content
        selected = rank_and_select(parse_question_list(raw), config)

        decision = _terminate_for(iteration + 1, config, len(selected))
        session.revisions.append(revision)
        if decision.stop:
            session.status = SessionStatus.DONE_NO_QUESTIONS
            session.touch()
            return []
        new_exchanges = [
            QAExchange(question=q, asked_at_iteration=iteration + 1) for q in selected
        ]
        session.exchanges.extend(new_exchanges)
        session.touch()
        return new_exchanges

    def record_answers(
        self,
        session: SessionTranscript,
        answers: Mapping[str, Answer],
        fill_skipped: bool = True,
    ) -> None:
        """Attach answers to pending exchanges by question ref.

        With ``fill_skipped`` (the default), pending questions that got no
        answer are recorded as skipped, so the round is fully resolved.
        """
        if session.status != SessionStatus.ACTIVE:
            raise SessionStateError(
                f"cannot record answers on a session with status {session.status.value}"
            )
        pending = {e.ref: e for e in session.pending_exchanges()}
        unknown = sorted(set(answers) - set(pending))
        if unknown:
            raise UnknownQuestionRef(
                f"no pending question with ref(s): {', '.join(unknown)}"
            )
        for ref, exchange in pending.items():
            if ref in answers:
                answer = answers[ref]
                if answer.question_ref != ref:
                    raise ValidationError(
                        f"answer for {ref} carries mismatched ref "
                        f"{answer.question_ref!r}"
                    )
                exchange.answer = answer
            elif fill_skipped:
                exchange.answer = Answer(
                    question_ref=ref, text="", source=AnswerSourceKind.SKIPPED
                )
        session.touch()

    def stop(self, session: SessionTranscript) -> None:
        """Mark the session stopped by the user; no-op once terminal."""
        if session.status == SessionStatus.ACTIVE:
            session.status = SessionStatus.DONE_USER_STOP
            session.touch()


def run_iteration(
    session: SessionTranscript,
    coder: Backend,
    communicator: Backend,
    answers: AnswerSource,
    settings: Optional[RequestSettings] = None,
) -> SessionTranscript:
    """Run one full loop iteration: generate, ask, collect answers.

    Appends exactly one revision; when the session stays active the newly
    selected questions are resolved through ``answers`` immediately. An
    answer-source stop ends the session as ``done_user_stop``, leaving the
    questions answered so far recorded.
    """
    engine = SessionEngine(
        coder=coder,
        communicator=communicator,
        settings=settings or RequestSettings(),
    )
    pending = engine.advance(session)
    if not pending:
        return session
    collected: dict[str, Answer] = {}
    try:
        for exchange in pending:
            collected[exchange.ref] = answers.answer(exchange.ref, exchange.question)
    except UserStopRequested:
        engine.record_answers(session, collected, fill_skipped=False)
        engine.stop(session)
        return session
    engine.record_answers(session, collected)
    return session
