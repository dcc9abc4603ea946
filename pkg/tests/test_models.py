import pytest

from clarifier.models import (
    Answer,
    AnswerSourceKind,
    CANONICAL_TOPIC_NAMES,
    ClarifyingQuestion,
    CodeRevision,
    ProblemDescription,
    PromptText,
    QAExchange,
    QuestionTopic,
    SessionConfig,
    SessionStatus,
    SessionTranscript,
    StopReason,
    TerminationDecision,
    ValidationError,
    default_topic_priorities,
    question_ref,
)


def test_fifteen_canonical_topics():
    assert len(CANONICAL_TOPIC_NAMES) == 15
    assert len(set(CANONICAL_TOPIC_NAMES)) == 15


def test_topic_rejects_unknown_canonical():
    with pytest.raises(ValidationError):
        QuestionTopic("Coding Style")
    assert QuestionTopic.other("Coding Style").is_other


def test_other_topic_label_must_be_nonempty():
    with pytest.raises(ValidationError):
        QuestionTopic.other("   ")


def test_topic_from_name_round_trips():
    assert QuestionTopic.from_name("Input Validation") == QuestionTopic("Input Validation")
    assert QuestionTopic.from_name("Coding Style") == QuestionTopic.other("Coding Style")


def test_default_priorities_cover_all_topics_with_expected_head():
    priorities = default_topic_priorities()
    assert set(priorities) == {QuestionTopic(name) for name in CANONICAL_TOPIC_NAMES}
    assert priorities[QuestionTopic("Input Validation")] == 10
    assert priorities[QuestionTopic("Error Handling")] == 9
    assert priorities[QuestionTopic("Output Type")] == 8
    assert priorities[QuestionTopic("Testing")] == 7
    assert all(weight >= 1 for weight in priorities.values())


def test_question_requires_text():
    with pytest.raises(ValidationError):
        ClarifyingQuestion(topic=QuestionTopic("Testing"), text="  ", source_order=0)


def test_answer_skip_semantics():
    with pytest.raises(ValidationError):
        Answer(question_ref="q1.0", text="something", source=AnswerSourceKind.SKIPPED)
    with pytest.raises(ValidationError):
        Answer(question_ref="q1.0", text="", source=AnswerSourceKind.HUMAN)
    skipped = Answer(question_ref="q1.0", text="", source=AnswerSourceKind.SKIPPED)
    assert skipped.skipped


def test_prompt_text_concatenation_invariant():
    PromptText(text="ab", role_messages=(("system", "a"), ("user", "b")))
    with pytest.raises(ValidationError):
        PromptText(text="ab", role_messages=(("system", "a"), ("user", "c")))


def test_description_must_be_nonempty():
    with pytest.raises(ValidationError):
        ProblemDescription(text="   \n ")


def test_session_config_validation():
    with pytest.raises(ValidationError):
        SessionConfig(max_iterations=0)
    with pytest.raises(ValidationError):
        SessionConfig(questions_per_round=0)
    with pytest.raises(ValidationError):
        SessionConfig(topic_priorities={QuestionTopic("Testing"): float("inf")})
    with pytest.raises(ValidationError):
        SessionConfig(topic_priorities={QuestionTopic("Testing"): -1.0})


def test_termination_decision_reason_consistency():
    with pytest.raises(ValidationError):
        TerminationDecision(stop=False, reason=StopReason.MAX_ITERATIONS)
    TerminationDecision(stop=False, reason=StopReason.NONE)


def test_transcript_validate_catches_gapped_iterations(fib_description, default_config):
    session = SessionTranscript(
        description=fib_description,
        config_snapshot=default_config,
        revisions=[CodeRevision(iteration=1, code="x", coder_prompt="p")],
    )
    with pytest.raises(ValidationError):
        session.validate()


def test_transcript_validate_catches_mismatched_answer_ref(fib_description, default_config):
    question = ClarifyingQuestion(topic=QuestionTopic("Testing"), text="ok?", source_order=0)
    exchange = QAExchange(
        question=question,
        asked_at_iteration=1,
        answer=Answer(question_ref="q9.9", text="yes", source=AnswerSourceKind.HUMAN),
    )
    session = SessionTranscript(
        description=fib_description,
        config_snapshot=default_config,
        revisions=[CodeRevision(iteration=0, code="x", coder_prompt="p")],
        exchanges=[exchange],
        status=SessionStatus.ACTIVE,
    )
    with pytest.raises(ValidationError):
        session.validate()
    exchange.answer = Answer(
        question_ref=question_ref(1, 0), text="yes", source=AnswerSourceKind.HUMAN
    )
    session.validate()


def test_done_status_requires_a_revision(fib_description, default_config):
    session = SessionTranscript(
        description=fib_description,
        config_snapshot=default_config,
        status=SessionStatus.DONE_NO_QUESTIONS,
    )
    with pytest.raises(ValidationError):
        session.validate()
