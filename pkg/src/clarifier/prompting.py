"""Prompt construction, question-list parsing, and question ranking.

The communicator is asked to emit questions in a small line-oriented
grammar (the same one :func:`format_question_list` writes):

* a topic header is a line ending with ``:`` (e.g. ``Input Validation:``),
* each question under it is a numbered (``1.`` / ``1)``) or dashed
  (``-`` / ``*``) entry on its own line,
* anything else is ignored.

The parser is tolerant: unknown headers become ``other`` topics, entries
before any header fall into ``other("uncategorized")``, and arbitrary
input never raises.
"""

from __future__ import annotations

import re
from dataclasses import replace
from typing import Optional, Sequence

from clarifier.models import (
    CANONICAL_TOPIC_NAMES,
    ClarifyingQuestion,
    CodeRevision,
    CommunicationLevel,
    ProblemDescription,
    PromptText,
    QAExchange,
    QuestionTopic,
    SessionConfig,
    TOPIC_OTHER_UNCATEGORIZED,
    _normalize_label,
)

COMMUNICATOR_INSTRUCTION = (
    "You are an expert in software engineering. You will be given the problem "
    "description and current code of a coding task. You will generate a list "
    "of clarifying questions that may result in refining the code."
)

FORMAT_DIRECTIVE = (
    "Group the questions by topic. Write each topic on its own line ending "
    "with a colon, then number each question under its topic (1., 2., ...). "
    "Output only the question list."
)

CODER_INSTRUCTION = (
    "You are an expert software engineer. Complete the coding task below."
)

CODER_OUTPUT_DIRECTIVE = (
    "Respond with the complete code in a single fenced code block and "
    "nothing else."
)

PROBLEM_HEADER = "### Problem Description"
PREVIOUS_CODE_HEADER = "### Generated Code From Previous Iteration"
CLARIFICATIONS_HEADER = "### Clarifications"


class CoderOutputError(ValueError):
    """The coder backend returned output no code can be extracted from."""


def build_communicator_prompt(
    desc: ProblemDescription, prev_code: Optional[CodeRevision] = None
) -> PromptText:
    """Prompt asking the communicator for clarifying questions.

    Contains, in order: the communicator instruction, the quoted problem
    description, the previous code verbatim (when given), and the
    output-format directive the parser understands.
    """
    system = COMMUNICATOR_INSTRUCTION + "\n\n"
    parts = [f'{PROBLEM_HEADER}\n"{desc.text}"\n']
    if prev_code is not None:
        parts.append(f"\n{PREVIOUS_CODE_HEADER}\n{prev_code.code}\n")
    parts.append(f"\n{FORMAT_DIRECTIVE}\n")
    user = "".join(parts)
    return PromptText(
        text=system + user,
        role_messages=(("system", system), ("user", user)),
    )


def build_coder_prompt(
    desc: ProblemDescription,
    qa: Sequence[QAExchange],
    prev_code: Optional[CodeRevision] = None,
) -> PromptText:
    """Prompt asking the coder to generate or refine code.

    Answered (non-skipped) exchanges appear as ``Q:``/``A:`` blocks in ask
    order; skipped or pending ones are omitted.
    """
    system = CODER_INSTRUCTION + "\n\n"
    parts = [f'{PROBLEM_HEADER}\n"{desc.text}"\n']
    if prev_code is not None:
        parts.append(f"\n{PREVIOUS_CODE_HEADER}\n{prev_code.code}\n")
    answered = [e for e in qa if e.answer is not None and not e.answer.skipped]
    if answered:
        parts.append(f"\n{CLARIFICATIONS_HEADER}\n")
        for exch in answered:
            parts.append(f"Q: {exch.question.text}\nA: {exch.answer.text}\n")
    parts.append(f"\n{CODER_OUTPUT_DIRECTIVE}\n")
    user = "".join(parts)
    return PromptText(
        text=system + user,
        role_messages=(("system", system), ("user", user)),
    )


def classify_topic(label: str) -> QuestionTopic:
    """Map a header label onto the canonical taxonomy.

    Matching ignores case and punctuation; anything unrecognized becomes an
    ``other`` topic with the trimmed label.
    """
    normalized = _normalize_label(label)
    for name in CANONICAL_TOPIC_NAMES:
        if _normalize_label(name) == normalized:
            return QuestionTopic(name)
    trimmed = label.strip()
    if not trimmed:
        return TOPIC_OTHER_UNCATEGORIZED
    return QuestionTopic.other(trimmed)


_ENTRY_RE = re.compile(r"^\s*(?:\d+[.)]|[-*])\s+(\S.*?)\s*$")


def parse_question_list(raw: str) -> list[ClarifyingQuestion]:
    """Parse communicator output into questions, in source order.

    Total: never raises; input with no recognizable entries yields an
    empty list. Declarative entries (no ``?``) are kept as-is.
    """
    questions: list[ClarifyingQuestion] = []
    current_topic = TOPIC_OTHER_UNCATEGORIZED
    for line in raw.splitlines():
        entry = _ENTRY_RE.match(line)
        if entry:
            questions.append(
                ClarifyingQuestion(
                    topic=current_topic,
                    text=entry.group(1),
                    source_order=len(questions),
                )
            )
            continue
        stripped = line.strip()
        if stripped.endswith(":") and stripped[:-1].strip():
            current_topic = classify_topic(stripped[:-1])
    return questions


def format_question_list(questions: Sequence[ClarifyingQuestion]) -> str:
    """Render questions in the grammar :func:`parse_question_list` reads.

    Questions are written in the given order; a header is emitted whenever
    the topic changes, numbering restarts per header. Parsing the result
    reproduces the same (topic, text) sequence.
    """
    lines: list[str] = []
    previous_topic: Optional[QuestionTopic] = None
    number = 0
    for question in questions:
        if question.topic != previous_topic:
            if lines:
                lines.append("")
            lines.append(f"{question.topic.name}:")
            previous_topic = question.topic
            number = 0
        number += 1
        lines.append(f"{number}. {question.text}")
    return "\n".join(lines)


def rank_and_select(
    questions: Sequence[ClarifyingQuestion], config: SessionConfig
) -> list[ClarifyingQuestion]:
    """Score questions by topic priority and pick this round's batch.

    Scores come from ``config.topic_priorities`` (unlisted topics score 0).
    Ordering is by score descending, ties broken by source order, so the
    result is deterministic and invariant under positive scaling of the
    weights. The communication level bounds the batch: ``under`` asks one
    question, ``effective`` asks ``questions_per_round``, ``over`` asks all.
    """
    scored = [
        replace(q, score=config.topic_priorities.get(q.topic, 0.0)) for q in questions
    ]
    scored.sort(key=lambda q: (-q.score, q.source_order))
    if config.communication_level == CommunicationLevel.UNDER:
        limit = 1
    elif config.communication_level == CommunicationLevel.EFFECTIVE:
        limit = config.questions_per_round
    else:
        limit = len(scored)
    return scored[:limit]


_FENCE_RE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)


def extract_code(coder_output: str) -> tuple[str, Optional[str]]:
    """Pull the code (and optional fence language tag) from coder output.

    Uses the first fenced block; without a fence the whole output, trimmed,
    counts as code.
    """
    if not coder_output.strip():
        raise CoderOutputError("coder produced no code")
    match = _FENCE_RE.search(coder_output)
    if match is None:
        return coder_output.strip(), None
    tag = match.group(1).strip() or None
    body = match.group(2)
    if body.endswith("\n"):
        body = body[:-1]
    return body, tag
