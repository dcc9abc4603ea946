"""Benchmark report output: stdout table, JSON, CSV, and figures.

``write_report`` drops four artifacts into the output directory:
``report.json`` (machine-readable), ``results.csv`` (one row per task and
arm), and two PNG figures (pass/fail by arm, reference-topic recall).
Everything is deterministic for a given report; transcript paths are kept
relative to the directory.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from clarifier.evalharness import EvalReport, TaskResult

CSV_COLUMNS = [
    "task_id",
    "arm",
    "passed",
    "checks_passed",
    "questions_asked",
    "topics_hit",
    "transcript_path",
    "error",
]


def render_table(report: EvalReport) -> str:
    """Human-readable summary table."""
    rows = [("task", "with", "without", "recall")]
    for pair in report.pairs:
        rows.append(
            (
                pair.task_id,
                "PASS" if pair.with_clarification.passed else "FAIL",
                "PASS" if pair.without_clarification.passed else "FAIL",
                f"{pair.topic_recall:.2f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    lines.append("")
    lines.append(f"clarification_gain: {report.clarification_gain:+.3f}")
    lines.append(f"topic_recall:       {report.topic_recall:.3f}")
    return "\n".join(lines)


def _csv_row(result: TaskResult) -> list[str]:
    return [
        result.task_id,
        result.arm.value,
        "true" if result.passed else "false",
        str(result.checks_passed),
        str(result.questions_asked),
        ";".join(sorted(t.name for t in result.topics_hit)),
        result.transcript_path,
        result.error or "",
    ]


def write_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, results.csv and figures; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_path = out_dir / "report.json"
    report_path.write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    csv_path = out_dir / "results.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for pair in report.pairs:
            writer.writerow(_csv_row(pair.with_clarification))
            writer.writerow(_csv_row(pair.without_clarification))

    figures_dir = out_dir / "figures"
    figures_dir.mkdir(exist_ok=True)
    outcome_path = figures_dir / "arm_outcomes.png"
    recall_path = figures_dir / "topic_recall.png"
    _plot_outcomes(report, outcome_path)
    _plot_recall(report, recall_path)

    return {
        "report": report_path,
        "csv": csv_path,
        "arm_outcomes": outcome_path,
        "topic_recall": recall_path,
    }


def _plot_outcomes(report: EvalReport, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [pair.task_id for pair in report.pairs]
    with_vals = [int(pair.with_clarification.passed) for pair in report.pairs]
    without_vals = [int(pair.without_clarification.passed) for pair in report.pairs]
    positions = range(len(labels))

    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(labels)), 4.0))
    ax.bar(
        [p - 0.2 for p in positions], with_vals, width=0.4,
        label="with clarification", color="#2a9d8f",
    )
    ax.bar(
        [p + 0.2 for p in positions], without_vals, width=0.4,
        label="without clarification", color="#e76f51",
    )
    ax.set_xticks(list(positions))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_yticks([0, 1])
    ax.set_yticklabels(["fail", "pass"])
    ax.set_title(
        f"Task outcomes by arm (clarification gain "
        f"{report.clarification_gain:+.2f})"
    )
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_recall(report: EvalReport, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [pair.task_id for pair in report.pairs]
    recalls = [pair.topic_recall for pair in report.pairs]

    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(labels)), 4.0))
    ax.bar(range(len(labels)), recalls, width=0.6, color="#264653")
    if labels:
        ax.axhline(
            report.topic_recall, color="#e9c46a", linestyle="--",
            label=f"mean {report.topic_recall:.2f}",
        )
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("reference-topic recall")
    ax.set_title("Reference-topic recall per task")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
