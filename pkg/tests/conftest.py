from pathlib import Path

import pytest

from largeactive.ingest import load_changes, load_facts
from largeactive.model import ChangeHistory, CommitRecord, FactsDb, FileRef, FunctionRef

FIXTURES = Path(__file__).parent / "fixtures"


def make_db(functions: dict[str, str], calls=()) -> FactsDb:
    """FactsDb from ``{function id: file path}`` and ``(caller, callee)`` pairs."""
    refs = [FunctionRef(fid, FileRef(path), fid.split("#")[-1]) for fid, path in functions.items()]
    return FactsDb(refs, calls)


def make_history(touches: dict[str, tuple[int, list[str]]]) -> ChangeHistory:
    """ChangeHistory from ``{commit id: (timestamp, touched function ids)}``."""
    return ChangeHistory(
        CommitRecord(cid, ts, frozenset(fns), frozenset(f.split("#")[0] for f in fns))
        for cid, (ts, fns) in touches.items()
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def bundled():
    db = load_facts((FIXTURES / "facts.json").read_text())
    history = load_changes((FIXTURES / "changes.json").read_text())
    return db, history


ACCEPTANCE: list[str] = []


def verdict(number: int, name: str, ok: bool, detail: str = "") -> None:
    """Record one acceptance line and fail the calling test when ``ok`` is false."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
