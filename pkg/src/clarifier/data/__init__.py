"""Bundled fixture data: the golden demo script and the desk benchmark suite."""

from importlib.resources import files
from pathlib import Path


def _data_root() -> Path:
    return Path(str(files("clarifier.data")))


def golden_script_path() -> Path:
    """Scripted backend replaying the Fibonacci demo session."""
    return _data_root() / "golden_fibonacci.json"


def taxonomy_fixture_path() -> Path:
    """The 15-topic, 24-question fixture exercising the question grammar."""
    return _data_root() / "table1_questions.txt"


def desk_suite_dir() -> Path:
    """Eight blurred-description benchmark tasks plus their replay scripts."""
    return _data_root() / "desk_suite"
