"""Command-line entry point.

Subcommands: ``run`` (interactive session), ``replay`` (pretty-print a
saved transcript), ``eval`` (two-arm benchmark over a task suite),
``serve`` (HTTP API + web UI), ``config`` (print the effective config).

Exit codes: 0 success, 1 runtime error, 2 usage/validation error,
3 failed ``--require-gain`` threshold.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, TextIO

from clarifier.backend import (
    Backend,
    BackendError,
    HttpBackend,
    RequestSettings,
    scripted_from_file,
)
from clarifier.config import CliConfig, resolve_config
from clarifier.evalharness import (
    EvalTask,
    IsolationError,
    aggregate,
    load_suite,
    run_task,
)
from clarifier.models import (
    Answer,
    AnswerSourceKind,
    ClarifyingQuestion,
    CodeRevision,
    ProblemDescription,
    QAExchange,
    SessionStatus,
    SessionTranscript,
    ValidationError,
)
from clarifier.persistence import (
    TranscriptFormatError,
    load_transcript_file,
    save_transcript,
    save_transcript_file,
)
from clarifier.prompting import format_question_list
from clarifier.session import SessionEngine, UserStopRequested, new_session
from clarifier.reporting import render_table, write_report

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_THRESHOLD = 3

STATUS_LINES = {
    SessionStatus.DONE_MAX_ITERATIONS: "Session complete: iteration budget reached.",
    SessionStatus.DONE_NO_QUESTIONS: "Session complete: no further questions.",
    SessionStatus.DONE_USER_STOP: "Session stopped by user.",
    SessionStatus.FAILED: "Session failed.",
    SessionStatus.ACTIVE: "Session still active.",
}


# ---------------------------------------------------------------------------
# Output formatting. Everything printed goes through these helpers so the
# golden-output tests stay stable.
# ---------------------------------------------------------------------------

def render_revision(rev: CodeRevision) -> str:
    tag = f" [{rev.language_hint}]" if rev.language_hint else ""
    return f"--- revision {rev.iteration}{tag} ---\n{rev.code}\n"


def render_question_round(exchanges: Sequence[QAExchange]) -> str:
    questions = [e.question for e in exchanges]
    return (
        "Clarifying questions (answer, press Enter to skip, or /stop):\n\n"
        + format_question_list(questions)
        + "\n"
    )


def render_exchange(exchange: QAExchange) -> str:
    lines = [f"  [{exchange.question.topic.name}] {exchange.question.text}"]
    if exchange.answer is None:
        lines.append("    (unanswered)")
    elif exchange.answer.skipped:
        lines.append("    (skipped)")
    else:
        lines.append(f"    answer ({exchange.answer.source.value}): {exchange.answer.text}")
    return "\n".join(lines)


def render_transcript(session: SessionTranscript) -> str:
    parts = [
        f"Description: {session.description.text}",
        f"Status: {session.status.value}",
        f"Config: max_iterations={session.config_snapshot.max_iterations} "
        f"level={session.config_snapshot.communication_level.value} "
        f"questions_per_round={session.config_snapshot.questions_per_round}",
        "",
    ]
    for rev in session.revisions:
        parts.append(render_revision(rev))
        asked = [e for e in session.exchanges if e.asked_at_iteration == rev.iteration + 1]
        if asked:
            parts.append(f"Questions after revision {rev.iteration}:")
            parts.extend(render_exchange(e) for e in asked)
            parts.append("")
    parts.append(STATUS_LINES[session.status])
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Interactive answering
# ---------------------------------------------------------------------------

@dataclass
class InteractiveAnswerSource:
    """Reads answers line by line: empty line skips, ``/stop`` ends."""

    stdin: TextIO
    stdout: TextIO

    def answer(self, ref: str, question: ClarifyingQuestion) -> Answer:
        self.stdout.write(f"[{question.topic.name}] {question.text}\n> ")
        self.stdout.flush()
        line = self.stdin.readline()
        if line == "":
            raise UserStopRequested("end of input")
        line = line.rstrip("\n")
        if line.strip() == "/stop":
            raise UserStopRequested("user stop")
        if not line.strip():
            return Answer(question_ref=ref, text="", source=AnswerSourceKind.SKIPPED)
        return Answer(question_ref=ref, text=line, source=AnswerSourceKind.HUMAN)


# ---------------------------------------------------------------------------
# Backend wiring
# ---------------------------------------------------------------------------

def make_backend(cfg: CliConfig, script: Optional[str] = None) -> Backend:
    """Build the configured backend; one instance serves both roles."""
    if cfg.backend == "scripted":
        path = script or cfg.script
        if not path:
            raise ValidationError("--backend scripted requires --script PATH")
        return scripted_from_file(path)
    return HttpBackend(
        cfg.llm.base_url,
        api_key=cfg.llm.api_key,
        max_retries=cfg.llm.max_retries,
    )


def request_settings(cfg: CliConfig) -> RequestSettings:
    return RequestSettings(
        model_id=cfg.llm.model,
        temperature=cfg.llm.temperature,
        timeout=cfg.llm.timeout_seconds,
    )


def _config_from_args(args: argparse.Namespace) -> CliConfig:
    return resolve_config(
        config_path=args.config,
        backend=getattr(args, "backend", None),
        script=getattr(args, "script", None),
        max_iterations=getattr(args, "max_iterations", None),
        level=getattr(args, "level", None),
        questions=getattr(args, "questions", None),
    )


def _read_description(raw: str) -> ProblemDescription:
    if raw.startswith("@"):
        path = Path(raw[1:])
        if not path.is_file():
            raise ValidationError(f"description file not found: {path}")
        return ProblemDescription(text=path.read_text(encoding="utf-8").strip())
    return ProblemDescription(text=raw)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(args: argparse.Namespace, stdin: TextIO, stdout: TextIO) -> int:
    cfg = _config_from_args(args)
    description = _read_description(args.description)
    backend = make_backend(cfg)
    engine = SessionEngine(
        coder=backend, communicator=backend, settings=request_settings(cfg)
    )
    session = new_session(description, cfg.session)
    source = InteractiveAnswerSource(stdin=stdin, stdout=stdout)

    while session.status == SessionStatus.ACTIVE:
        pending = engine.advance(session)
        stdout.write(render_revision(session.revisions[-1]))
        if not pending:
            break
        stdout.write("\n" + render_question_round(pending) + "\n")
        collected: dict[str, Answer] = {}
        stopped = False
        for exchange in pending:
            try:
                collected[exchange.ref] = source.answer(exchange.ref, exchange.question)
            except UserStopRequested:
                stopped = True
                break
        engine.record_answers(session, collected, fill_skipped=not stopped)
        if stopped:
            engine.stop(session)
        stdout.write("\n")

    stdout.write(STATUS_LINES[session.status] + "\n")
    if args.out:
        save_transcript_file(session, args.out)
        stdout.write(f"Transcript written to {args.out}\n")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace, stdout: TextIO) -> int:
    try:
        session = load_transcript_file(args.transcript)
    except TranscriptFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.format == "machine":
        stdout.write(save_transcript(session).decode("utf-8"))
    else:
        stdout.write(render_transcript(session))
    return EXIT_OK


def _eval_backends(
    cfg: CliConfig, suite_dir: Path, tasks: Sequence[EvalTask]
) -> dict[str, Backend]:
    """One backend per task so parallel runs stay isolated."""
    backends: dict[str, Backend] = {}
    if cfg.backend == "scripted":
        scripts_dir = suite_dir / "scripts"
        for task in tasks:
            script = scripts_dir / f"{task.id}.json"
            if not script.is_file():
                raise ValidationError(
                    f"no replay script for task {task.id!r}: expected {script}"
                )
            backends[task.id] = scripted_from_file(script)
    else:
        for task in tasks:
            backends[task.id] = HttpBackend(
                cfg.llm.base_url,
                api_key=cfg.llm.api_key,
                max_retries=cfg.llm.max_retries,
            )
    return backends


def cmd_eval(args: argparse.Namespace, stdout: TextIO) -> int:
    cfg = _config_from_args(args)
    suite_dir = Path(args.suite)
    tasks = load_suite(suite_dir)
    out_dir = Path(args.out or "eval_report")
    if not tasks:
        print(f"warning: no tasks found in {suite_dir}", file=sys.stderr)
        report = aggregate([], [])
        write_report(report, out_dir)
        stdout.write(render_table(report) + "\n")
        return EXIT_OK

    backends = _eval_backends(cfg, suite_dir, tasks)
    settings = request_settings(cfg)
    transcripts_dir = out_dir / "transcripts"

    def run_one(task: EvalTask):
        backend = backends[task.id]
        return run_task(
            task,
            cfg.session,
            backend,
            backend,
            out_dir=transcripts_dir,
            allow_exec=args.allow_exec,
            settings=settings,
        )

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            pairs = list(pool.map(run_one, tasks))
    else:
        pairs = [run_one(task) for task in tasks]

    results = [result for pair in pairs for result in pair]
    report = aggregate(results, tasks)
    paths = write_report(report, out_dir)
    stdout.write(render_table(report) + "\n")
    stdout.write(f"Report written to {paths['report']}\n")

    if report.errored:
        print("error: one or more tasks failed to run", file=sys.stderr)
        return EXIT_RUNTIME
    if args.require_gain is not None and report.clarification_gain < args.require_gain:
        print(
            f"error: clarification gain {report.clarification_gain:+.3f} is below "
            f"the required {args.require_gain:+.3f}",
            file=sys.stderr,
        )
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, stdout: TextIO) -> int:
    import socket

    import uvicorn

    from clarifier.service import create_app

    cfg = _config_from_args(args)
    backend = make_backend(cfg)
    app = create_app(
        coder=backend,
        communicator=backend,
        session_config=cfg.session,
        settings=request_settings(cfg),
        out_dir=Path(args.out_dir) if args.out_dir else None,
        ui_dir=Path(args.ui_dir) if args.ui_dir else _default_ui_dir(),
    )
    # Probe the port first for a clean error message.
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.bind((args.host, args.port))
        probe.close()
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    stdout.write(f"Serving on http://{args.host}:{args.port}\n")
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _default_ui_dir() -> Optional[Path]:
    candidate = Path.cwd() / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def cmd_config(args: argparse.Namespace, stdout: TextIO) -> int:
    cfg = _config_from_args(args)
    stdout.write(json.dumps(cfg.dump(), indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clarifier",
        description="Clarifying-question loop for LLM code generation.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file path (or CLARIFIER_CONFIG)")
    common.add_argument(
        "--backend", choices=["scripted", "http"], help="backend kind (default http)"
    )
    common.add_argument("--script", help="script file for the scripted backend")
    common.add_argument("--max-iterations", type=int, dest="max_iterations")
    common.add_argument(
        "--level", choices=["under", "effective", "over"], help="communication level"
    )
    common.add_argument(
        "--questions", type=int, help="questions per round at the effective level"
    )

    run = subparsers.add_parser(
        "run", parents=[common], help="run an interactive clarification session"
    )
    run.add_argument("description", help="problem description text, or @FILE")
    run.add_argument("--out", help="write the transcript to this path")
    run.set_defaults(handler="run")

    replay = subparsers.add_parser(
        "replay", parents=[common], help="pretty-print a saved transcript"
    )
    replay.add_argument("transcript", help="transcript file path")
    replay.add_argument(
        "--format", choices=["pretty", "machine"], default="pretty"
    )
    replay.set_defaults(handler="replay")

    evaluate = subparsers.add_parser(
        "eval", parents=[common], help="run the two-arm benchmark over a task suite"
    )
    evaluate.add_argument("suite", help="directory of task files")
    evaluate.add_argument("--out", help="report directory (default eval_report)")
    evaluate.add_argument(
        "--allow-exec",
        action="store_true",
        help="permit external_command checks to execute",
    )
    evaluate.add_argument("--jobs", type=int, default=1, help="parallel task workers")
    evaluate.add_argument(
        "--require-gain",
        type=float,
        dest="require_gain",
        help="exit 3 unless clarification gain reaches this value",
    )
    evaluate.set_defaults(handler="eval")

    serve = subparsers.add_parser(
        "serve", parents=[common], help="serve the HTTP API and web UI"
    )
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument(
        "--out-dir", dest="out_dir", help="write transcripts here after each change"
    )
    serve.add_argument(
        "--ui-dir", dest="ui_dir", help="static UI directory (default frontend/dist)"
    )
    serve.set_defaults(handler="serve")

    config = subparsers.add_parser(
        "config", parents=[common], help="print the effective configuration"
    )
    config.set_defaults(handler="config")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    stdin = sys.stdin
    stdout = sys.stdout
    try:
        if args.handler == "run":
            return cmd_run(args, stdin, stdout)
        if args.handler == "replay":
            return cmd_replay(args, stdout)
        if args.handler == "eval":
            return cmd_eval(args, stdout)
        if args.handler == "serve":
            return cmd_serve(args, stdout)
        return cmd_config(args, stdout)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BackendError, IsolationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
