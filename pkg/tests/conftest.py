"""Shared fixtures: golden session content and scripted-backend builders."""

from __future__ import annotations

import pytest

from clarifier.backend import ScriptedBackend, ScriptedEntry
from clarifier.data import desk_suite_dir, golden_script_path, taxonomy_fixture_path
from clarifier.models import ProblemDescription, SessionConfig

# The demo session's fixed content. Tests freeze the exact strings here so a
# fixture-file edit cannot silently change what "correct" means.
GOLDEN_DESCRIPTION = "write a function to return n-th Fibonacci number. n is an int"

GOLDEN_INITIAL_CODE = """def fibonacci(n):
    if n <= 0:
        return 0
    elif n == 1:
        return 1
    fib = [0, 1]
    for i in range(2, n + 1):
        next_fib = fib[i - 1] + fib[i - 2]
        fib.append(next_fib)
    return fib[n]"""

GOLDEN_REFINED_CODE = """def fibonacci(n):
    if not isinstance(n, int):
        raise TypeError("n must be an int")
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0
    if n == 1:
        return 1
    fib = [0, 1]
    for i in range(2, n + 1):
        next_fib = fib[i - 1] + fib[i - 2]
        fib.append(next_fib)
    return fib[n]"""

GOLDEN_ANSWER = "Negative n is invalid; raise a ValueError for negative input."


@pytest.fixture
def golden_path():
    return golden_script_path()


@pytest.fixture
def taxonomy_fixture() -> str:
    return taxonomy_fixture_path().read_text(encoding="utf-8")


@pytest.fixture
def suite_dir():
    return desk_suite_dir()


@pytest.fixture
def fib_description() -> ProblemDescription:
    return ProblemDescription(text=GOLDEN_DESCRIPTION)


@pytest.fixture
def default_config() -> SessionConfig:
    return SessionConfig()


def make_scripted(*contents_or_entries) -> ScriptedBackend:
    entries = [
        entry if isinstance(entry, ScriptedEntry) else ScriptedEntry(content=entry)
        for entry in contents_or_entries
    ]
    return ScriptedBackend(entries=entries)
