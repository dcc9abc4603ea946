"""Two-arm benchmark for blurred task descriptions.

Each task pairs a deliberately underspecified description with a hidden
spec. The *with_clarification* arm runs the full session loop against the
simulated user; the *without_clarification* arm gives the coder exactly one
shot with no communicator. Both arms' final code is judged by the task's
checks, and the report's clarification gain is the pass-rate difference.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from clarifier.backend import Backend, BackendError, RequestSettings
from clarifier.models import (
    ProblemDescription,
    QuestionTopic,
    SessionConfig,
    SessionStatus,
    ValidationError,
)
from clarifier.persistence import save_transcript_file
from clarifier.session import SessionEngine, new_session, run_iteration
from clarifier.simulated_user import HiddenSpec, SimulatedUserSource


class TaskFormatError(ValidationError):
    """A task file or suite directory is malformed."""


class IsolationError(RuntimeError):
    """Hidden-spec content leaked into a no-clarification transcript."""


class CheckKind(str, Enum):
    MUST_CONTAIN_SUBSTRING = "must_contain_substring"
    MUST_MATCH_REGEX = "must_match_regex"
    EXTERNAL_COMMAND = "external_command"


@dataclass(frozen=True)
class Check:
    """One acceptance predicate over generated code.

    ``expect_pass=False`` inverts the predicate (the code must *not*
    contain/match). External commands only run when execution is enabled;
    otherwise the check counts as failed.
    """

    kind: CheckKind
    payload: str
    expect_pass: bool = True

    def __post_init__(self) -> None:
        if self.kind == CheckKind.MUST_MATCH_REGEX:
            try:
                re.compile(self.payload)
            except re.error as exc:
                raise TaskFormatError(f"invalid check regex {self.payload!r}: {exc}")
        if self.kind == CheckKind.EXTERNAL_COMMAND and not self.payload.strip():
            raise TaskFormatError("external_command check needs a command")


@dataclass(frozen=True)
class EvalTask:
    id: str
    description: ProblemDescription
    hidden_spec: HiddenSpec
    checks: tuple[Check, ...]
    reference_topics: frozenset[QuestionTopic] = frozenset()

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise TaskFormatError("task id must be nonempty")
        if not self.checks:
            raise TaskFormatError(f"task {self.id!r} must define at least one check")


class Arm(str, Enum):
    WITH = "with_clarification"
    WITHOUT = "without_clarification"


@dataclass
class TaskResult:
    task_id: str
    arm: Arm
    passed: bool
    checks_passed: int
    questions_asked: int
    topics_hit: frozenset[QuestionTopic]
    transcript_path: str
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if self.arm == Arm.WITHOUT and self.questions_asked != 0:
            raise ValidationError(
                "a without_clarification result cannot have questions asked"
            )


@dataclass(frozen=True)
class CheckOutcome:
    passed: bool
    checks_passed: int
    failures: tuple[str, ...] = ()


@dataclass(frozen=True)
class TaskPair:
    task_id: str
    with_clarification: TaskResult
    without_clarification: TaskResult
    topic_recall: float


@dataclass(frozen=True)
class EvalReport:
    pairs: tuple[TaskPair, ...]
    clarification_gain: float
    topic_recall: float

    def to_dict(self) -> dict[str, Any]:
        def result_dict(result: TaskResult) -> dict[str, Any]:
            return {
                "passed": result.passed,
                "checks_passed": result.checks_passed,
                "questions_asked": result.questions_asked,
                "topics_hit": sorted(t.name for t in result.topics_hit),
                "transcript_path": result.transcript_path,
                "error": result.error,
            }

        return {
            "clarification_gain": self.clarification_gain,
            "topic_recall": self.topic_recall,
            "tasks": [
                {
                    "task_id": pair.task_id,
                    "topic_recall": pair.topic_recall,
                    "with_clarification": result_dict(pair.with_clarification),
                    "without_clarification": result_dict(pair.without_clarification),
                }
                for pair in self.pairs
            ],
        }

    @property
    def errored(self) -> bool:
        return any(
            pair.with_clarification.error or pair.without_clarification.error
            for pair in self.pairs
        )


def load_task(path: str | Path) -> EvalTask:
    """Load one task file (JSON, UTF-8)."""
    path = Path(path)
    if not path.is_file():
        raise TaskFormatError(f"task file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TaskFormatError(f"task file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise TaskFormatError(f"task file {path} must contain an object")
    try:
        task_id = raw["id"]
        description = ProblemDescription(text=raw["description"], source_id=task_id)
        hidden_spec = HiddenSpec.from_dict(raw.get("hidden_spec", {}))
        checks = tuple(
            Check(
                kind=CheckKind(item["kind"]),
                payload=item["payload"],
                expect_pass=bool(item.get("expect_pass", True)),
            )
            for item in raw.get("checks", [])
        )
        reference = frozenset(
            QuestionTopic.from_name(name) for name in raw.get("reference_topics", [])
        )
        return EvalTask(
            id=task_id,
            description=description,
            hidden_spec=hidden_spec,
            checks=checks,
            reference_topics=reference,
        )
    except TaskFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise TaskFormatError(f"task file {path} is malformed: {exc}")


def load_suite(directory: str | Path) -> list[EvalTask]:
    """Load every ``*.json`` task in a directory, ordered by id.

    Subdirectories (e.g. ``scripts/``) are not traversed. An empty
    directory yields an empty suite.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise TaskFormatError(f"suite directory not found: {directory}")
    tasks = [load_task(p) for p in sorted(directory.glob("*.json"))]
    seen: dict[str, EvalTask] = {}
    for task in tasks:
        if task.id in seen:
            raise TaskFormatError(f"duplicate task id {task.id!r} in {directory}")
        seen[task.id] = task
    return sorted(tasks, key=lambda t: t.id)


def check_code(
    code: str,
    checks: Sequence[Check],
    *,
    allow_exec: bool = False,
    exec_timeout: float = 30.0,
) -> CheckOutcome:
    """Evaluate code against all checks (all must hold to pass)."""
    failures: list[str] = []
    passed_count = 0
    for i, check in enumerate(checks):
        outcome, reason = _evaluate(code, check, allow_exec, exec_timeout)
        if outcome:
            passed_count += 1
        else:
            failures.append(f"check {i} ({check.kind.value}): {reason}")
    return CheckOutcome(
        passed=passed_count == len(checks),
        checks_passed=passed_count,
        failures=tuple(failures),
    )


def _evaluate(
    code: str, check: Check, allow_exec: bool, exec_timeout: float
) -> tuple[bool, str]:
    if check.kind == CheckKind.MUST_CONTAIN_SUBSTRING:
        hit = check.payload in code
        ok = hit == check.expect_pass
        return ok, "" if ok else (
            f"substring {check.payload!r} {'found' if hit else 'not found'}, "
            f"expected {'present' if check.expect_pass else 'absent'}"
        )
    if check.kind == CheckKind.MUST_MATCH_REGEX:
        hit = re.search(check.payload, code) is not None
        ok = hit == check.expect_pass
        return ok, "" if ok else (
            f"regex {check.payload!r} {'matched' if hit else 'did not match'}, "
            f"expected {'a match' if check.expect_pass else 'no match'}"
        )
    # external command
    if not allow_exec:
        return False, "execution disabled (pass --allow-exec to enable)"
    with tempfile.NamedTemporaryFile(
        "w", suffix=".code", delete=False, encoding="utf-8"
    ) as handle:
        handle.write(code)
        code_file = handle.name
    command = [
        part.replace("{code_file}", code_file)
        for part in shlex.split(check.payload)
    ]
    try:
        completed = subprocess.run(
            command, capture_output=True, timeout=exec_timeout
        )
    except FileNotFoundError:
        return False, f"command not found: {command[0]}"
    except subprocess.TimeoutExpired:
        return False, f"command timed out after {exec_timeout:.0f}s"
    finally:
        Path(code_file).unlink(missing_ok=True)
    hit = completed.returncode == 0
    ok = hit == check.expect_pass
    return ok, "" if ok else f"exit status {completed.returncode}"


def run_task(
    task: EvalTask,
    config: SessionConfig,
    coder: Backend,
    communicator: Backend,
    *,
    out_dir: str | Path,
    allow_exec: bool = False,
    settings: Optional[RequestSettings] = None,
) -> tuple[TaskResult, TaskResult]:
    """Run both arms of one task and persist their transcripts.

    A backend failure marks that arm failed (reason recorded) without
    aborting the other arm. With a shared scripted backend the with-arm
    always consumes its entries first.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    settings = settings or RequestSettings()

    with_result = _run_with_arm(
        task, config, coder, communicator, out_dir, allow_exec, settings
    )
    without_result = _run_without_arm(
        task, config, coder, communicator, out_dir, allow_exec, settings
    )
    return with_result, without_result


def _transcript_name(task_id: str, arm: Arm) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", task_id)
    return f"{safe}.{arm.value}.json"


def _run_with_arm(
    task: EvalTask,
    config: SessionConfig,
    coder: Backend,
    communicator: Backend,
    out_dir: Path,
    allow_exec: bool,
    settings: RequestSettings,
) -> TaskResult:
    session = new_session(task.description, config)
    source = SimulatedUserSource(task.hidden_spec)
    error: Optional[str] = None
    try:
        while session.status == SessionStatus.ACTIVE:
            run_iteration(session, coder, communicator, source, settings)
    except BackendError as exc:
        error = str(exc)
    path = out_dir / _transcript_name(task.id, Arm.WITH)
    save_transcript_file(session, path)
    topics_hit = frozenset(e.question.topic for e in session.exchanges)
    if error is not None or not session.revisions:
        return TaskResult(
            task_id=task.id,
            arm=Arm.WITH,
            passed=False,
            checks_passed=0,
            questions_asked=len(session.exchanges),
            topics_hit=topics_hit,
            transcript_path=path.name,
            error=error or "no code generated",
        )
    outcome = check_code(
        session.revisions[-1].code, task.checks, allow_exec=allow_exec
    )
    return TaskResult(
        task_id=task.id,
        arm=Arm.WITH,
        passed=outcome.passed,
        checks_passed=outcome.checks_passed,
        questions_asked=len(session.exchanges),
        topics_hit=topics_hit,
        transcript_path=path.name,
    )


def _run_without_arm(
    task: EvalTask,
    config: SessionConfig,
    coder: Backend,
    communicator: Backend,
    out_dir: Path,
    allow_exec: bool,
    settings: RequestSettings,
) -> TaskResult:
    # One coder shot: with a single-iteration budget the engine never
    # consults the communicator.
    solo_config = replace(config, max_iterations=1)
    session = new_session(task.description, solo_config)
    engine = SessionEngine(coder=coder, communicator=communicator, settings=settings)
    error: Optional[str] = None
    try:
        engine.advance(session)
    except BackendError as exc:
        error = str(exc)
    path = out_dir / _transcript_name(task.id, Arm.WITHOUT)
    save_transcript_file(session, path)
    _assert_no_leak(task, session)
    if error is not None or not session.revisions:
        return TaskResult(
            task_id=task.id,
            arm=Arm.WITHOUT,
            passed=False,
            checks_passed=0,
            questions_asked=0,
            topics_hit=frozenset(),
            transcript_path=path.name,
            error=error or "no code generated",
        )
    outcome = check_code(
        session.revisions[-1].code, task.checks, allow_exec=allow_exec
    )
    return TaskResult(
        task_id=task.id,
        arm=Arm.WITHOUT,
        passed=outcome.passed,
        checks_passed=outcome.checks_passed,
        questions_asked=0,
        topics_hit=frozenset(),
        transcript_path=path.name,
    )


def transcript_strings(session) -> list[str]:
    """Every free-text field of a transcript, for leak scanning."""
    strings = [session.description.text]
    for rev in session.revisions:
        strings.append(rev.coder_prompt)
        strings.append(rev.code)
    for exch in session.exchanges:
        strings.append(exch.question.text)
        if exch.answer is not None:
            strings.append(exch.answer.text)
    return strings


def _assert_no_leak(task: EvalTask, session) -> None:
    corpus = "\n".join(transcript_strings(session))
    for hidden in task.hidden_spec.hidden_strings():
        if hidden in corpus:
            raise IsolationError(
                f"task {task.id!r}: hidden fact leaked into the "
                f"no-clarification transcript: {hidden!r}"
            )


def aggregate(
    results: Iterable[TaskResult], tasks: Iterable[EvalTask]
) -> EvalReport:
    """Pair per-arm results and compute the report metrics.

    ``clarification_gain`` is pass-rate(with) - pass-rate(without);
    ``topic_recall`` averages, per task, the fraction of reference topics
    the with-arm's questions touched (tasks without reference topics count
    as fully recalled).
    """
    tasks_by_id = {task.id: task for task in tasks}
    by_task: dict[str, dict[Arm, TaskResult]] = {}
    for result in results:
        slot = by_task.setdefault(result.task_id, {})
        if result.arm in slot:
            raise ValidationError(
                f"duplicate {result.arm.value} result for task {result.task_id!r}"
            )
        slot[result.arm] = result

    pairs: list[TaskPair] = []
    for task_id in sorted(by_task):
        slot = by_task[task_id]
        if set(slot) != {Arm.WITH, Arm.WITHOUT}:
            missing = ({Arm.WITH, Arm.WITHOUT} - set(slot)).pop()
            raise ValidationError(
                f"task {task_id!r} is missing its {missing.value} result"
            )
        if task_id not in tasks_by_id:
            raise ValidationError(f"results reference unknown task {task_id!r}")
        reference = tasks_by_id[task_id].reference_topics
        hit = slot[Arm.WITH].topics_hit
        recall = 1.0 if not reference else len(hit & reference) / len(reference)
        pairs.append(
            TaskPair(
                task_id=task_id,
                with_clarification=slot[Arm.WITH],
                without_clarification=slot[Arm.WITHOUT],
                topic_recall=recall,
            )
        )

    if not pairs:
        return EvalReport(pairs=(), clarification_gain=0.0, topic_recall=0.0)
    gain = sum(p.with_clarification.passed for p in pairs) / len(pairs) - sum(
        p.without_clarification.passed for p in pairs
    ) / len(pairs)
    recall = sum(p.topic_recall for p in pairs) / len(pairs)
    return EvalReport(
        pairs=tuple(pairs), clarification_gain=gain, topic_recall=recall
    )
