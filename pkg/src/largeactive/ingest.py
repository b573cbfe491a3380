"""Loading facts and change history from JSON documents and raw diff logs."""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from largeactive.errors import ParseError, ValidationError
from largeactive.model import (
    ChangeHistory,
    CommitRecord,
    FactsDb,
    FileRef,
    FunctionRef,
    Violation,
    normalize_path,
    validate_facts,
)


@dataclass(frozen=True)
class DiffHunk:
    path: str
    new_start: int
    new_count: int

    def __post_init__(self):
        if self.new_start < 1:
            raise ValueError(f"new_start must be >= 1, got {self.new_start}")
        if self.new_count < 0:
            raise ValueError(f"new_count must be >= 0, got {self.new_count}")

    @property
    def new_range(self) -> tuple[int, int]:
        """Inclusive post-image line range; a pure deletion covers ``new_start`` only."""
        return self.new_start, self.new_start + max(self.new_count, 1) - 1


@dataclass(frozen=True)
class ParsedCommit:
    id: str
    timestamp: int
    hunks: tuple[DiffHunk, ...] = ()


@dataclass(frozen=True)
class Span:
    function_id: str
    start: int
    end: int


class SpanTable:
    """Function spans per (commit, file) in the post-image of that commit."""

    def __init__(self, entries: Mapping[tuple[str, str], Iterable[Span]] | None = None):
        self._entries: dict[tuple[str, str], tuple[Span, ...]] = {}
        problems = []
        for (commit, path), spans in (entries or {}).items():
            key = (commit, normalize_path(path))
            ordered = tuple(sorted(spans, key=lambda s: (s.start, s.end, s.function_id)))
            for s in ordered:
                if s.start < 1 or s.start > s.end:
                    problems.append(Violation("bad-span", s.function_id, f"{s.start}..{s.end}"))
            for a, b in zip(ordered, ordered[1:]):
                if b.start <= a.end:
                    problems.append(
                        Violation(
                            "overlapping-spans", f"{commit}:{path}", f"{a.function_id}, {b.function_id}"
                        )
                    )
            if key in self._entries:
                problems.append(Violation("duplicate-span-entry", f"{commit}:{path}"))
            self._entries[key] = ordered
        if problems:
            raise ValidationError(problems)
        self._starts = {k: [s.start for s in v] for k, v in self._entries.items()}

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def spans(self, commit: str, path: str) -> tuple[Span, ...] | None:
        return self._entries.get((commit, normalize_path(path)))

    def overlapping(self, commit: str, path: str, lo: int, hi: int) -> list[str]:
        """Ids of functions whose span intersects the inclusive range ``[lo, hi]``."""
        key = (commit, normalize_path(path))
        spans = self._entries.get(key, ())
        # spans are disjoint and sorted, so ends are sorted too
        i = bisect.bisect_right(self._starts.get(key, []), hi)
        hits = []
        for s in reversed(spans[:i]):
            if s.end < lo:
                break
            hits.append(s.function_id)
        return hits


# ---------------------------------------------------------------------------
# JSON documents


def _load_json(stream: IO[str] | str, what: str):
    text = stream if isinstance(stream, str) else stream.read()
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed {what} document: {exc.msg}", exc.lineno, exc.colno) from None


def _require(obj, key: str, types, where: str):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ParseError(f"{where}: field {key!r} has the wrong type")
    return value


def _optional_int(obj: dict, key: str, where: str) -> int | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParseError(f"{where}: field {key!r} must be an integer")
    return value


def _array(doc, key: str, what: str) -> list:
    if not isinstance(doc, dict):
        raise ParseError(f"{what} document must be a JSON object")
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise ParseError(f"{what} document: {key!r} must be an array")
    return value


def load_facts(stream: IO[str] | str) -> FactsDb:
    """Parse a facts document and validate it.

    Raises ParseError for malformed JSON or missing fields and ValidationError
    (listing every violation) when the facts break a FactsDb invariant.
    """
    doc = _load_json(stream, "facts")
    functions = []
    for i, item in enumerate(_array(doc, "functions", "facts")):
        where = f"functions[{i}]"
        fid = _require(item, "id", str, where)
        path = _require(item, "file", str, where)
        name = item.get("name", fid)
        if not isinstance(name, str):
            raise ParseError(f"{where}: field 'name' must be a string")
        start = _optional_int(item, "start_line", where)
        end = _optional_int(item, "end_line", where)
        if (start is None) != (end is None):
            raise ParseError(f"{where}: start_line and end_line must be given together")
        span = (start, end) if start is not None else None
        functions.append(FunctionRef(fid, FileRef(path), name, span))

    calls = []
    for i, item in enumerate(_array(doc, "calls", "facts")):
        where = f"calls[{i}]"
        calls.append((_require(item, "caller", str, where), _require(item, "callee", str, where)))

    db = FactsDb(functions, calls)
    report = validate_facts(db)
    if report:
        raise ValidationError(report)
    return db


def dump_facts(db: FactsDb) -> str:
    functions = []
    for f in db.functions:
        item = {"id": f.id, "file": f.file.path, "name": f.qualified_name}
        if f.span is not None:
            item["start_line"], item["end_line"] = f.span
        functions.append(item)
    calls = [{"caller": a, "callee": b} for a, b in sorted(db.calls)]
    return json.dumps({"functions": functions, "calls": calls}, indent=2) + "\n"


def load_changes(stream: IO[str] | str) -> ChangeHistory:
    """Parse a change document into a ChangeHistory in canonical order.

    Function ids are not checked against any FactsDb here; use
    :func:`largeactive.model.reconcile` after both are loaded.
    """
    doc = _load_json(stream, "change")
    commits = []
    for i, item in enumerate(_array(doc, "commits", "change")):
        where = f"commits[{i}]"
        cid = _require(item, "id", str, where)
        ts = _require(item, "timestamp", int, where)
        lists = {}
        for key in ("touched_functions", "touched_files", "fallback_files"):
            value = item.get(key, [])
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ParseError(f"{where}: {key!r} must be an array of strings")
            lists[key] = value
        commits.append(CommitRecord(cid, ts, **lists))
    return ChangeHistory(commits)


def dump_changes(history: ChangeHistory) -> str:
    commits = []
    for c in history.commits:
        item = {
            "id": c.id,
            "timestamp": c.timestamp,
            "touched_functions": sorted(c.touched_functions),
            "touched_files": sorted(c.touched_files),
        }
        if c.fallback_files:
            item["fallback_files"] = sorted(c.fallback_files)
        commits.append(item)
    return json.dumps({"commits": commits}, indent=2) + "\n"


def load_spans(stream: IO[str] | str) -> SpanTable:
    doc = _load_json(stream, "span")
    entries: dict[tuple[str, str], list[Span]] = {}
    for i, item in enumerate(_array(doc, "spans", "span")):
        where = f"spans[{i}]"
        commit = _require(item, "commit", str, where)
        path = _require(item, "file", str, where)
        funcs = _require(item, "functions", list, where)
        spans = []
        for j, fn in enumerate(funcs):
            fwhere = f"{where}.functions[{j}]"
            spans.append(
                Span(
                    _require(fn, "id", str, fwhere),
                    _require(fn, "start", int, fwhere),
                    _require(fn, "end", int, fwhere),
                )
            )
        key = (commit, normalize_path(path))
        if key in entries:
            raise ValidationError([Violation("duplicate-span-entry", f"{commit}:{path}")])
        entries[key] = spans
    return SpanTable(entries)


# ---------------------------------------------------------------------------
# raw log stream

_COMMIT = re.compile(r"^commit (\S+) (-?\d+)\s*$")
_HUNK = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_METADATA = (
    "diff ",
    "index ",
    "new file mode",
    "deleted file mode",
    "old mode",
    "new mode",
    "similarity index",
    "dissimilarity index",
    "rename from",
    "rename to",
    "copy from",
    "copy to",
)


def _strip_prefix(path: str) -> str | None:
    path = path.split("\t", 1)[0].rstrip()
    if path == "/dev/null":
        return None
    if path.startswith(("a/", "b/")):
        path = path[2:]
    return normalize_path(path)


def parse_git_log_stream(stream: IO[str] | Iterable[str] | str) -> list[ParsedCommit]:
    """Parse a zero-context unified-diff log into commits and hunks.

    Expected shape, per commit::

        commit <id> <unix-timestamp>
        --- a/<path>
        +++ b/<path>
        @@ -<s>,<c> +<s>,<c> @@

    Hunk bodies are consumed by their declared line counts. Files reported as
    binary are skipped. A zero-count hunk anchored at line 0 (deleting from the
    top of the file) is recorded at line 1.
    """
    lines = stream.splitlines() if isinstance(stream, str) else stream
    commits: list[ParsedCommit] = []
    current: tuple[str, int] | None = None
    hunks: list[DiffHunk] = []
    old_path: str | None = None
    new_path: str | None = None
    have_file = False
    old_left = new_left = 0

    def flush():
        if current is not None:
            commits.append(ParsedCommit(current[0], current[1], tuple(hunks)))

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if old_left > 0 or new_left > 0:
            if line.startswith("-") and old_left > 0:
                old_left -= 1
                continue
            if line.startswith("+") and new_left > 0:
                new_left -= 1
                continue
            if line.startswith(" ") and old_left > 0 and new_left > 0:
                old_left -= 1
                new_left -= 1
                continue
            if line.startswith("\\"):
                continue
            raise ParseError("hunk body shorter than its header declares", lineno)

        if not line.strip() or line.startswith("\\"):
            continue
        if line.startswith("commit"):
            m = _COMMIT.match(line)
            if not m:
                raise ParseError(f"bad commit header {line!r}", lineno)
            flush()
            current = (m.group(1), int(m.group(2)))
            hunks = []
            old_path = new_path = None
            have_file = False
            continue
        if current is None:
            raise ParseError(f"expected 'commit <id> <timestamp>', got {line!r}", lineno)
        if line.startswith("--- "):
            old_path = _strip_prefix(line[4:])
            new_path = None
            have_file = False
            continue
        if line.startswith("+++ "):
            new_path = _strip_prefix(line[4:])
            have_file = new_path is not None or old_path is not None
            continue
        if line.startswith("@@"):
            m = _HUNK.match(line)
            if not m:
                raise ParseError(f"truncated hunk header {line!r}", lineno)
            if not have_file:
                raise ParseError("hunk header before file header", lineno)
            old_count = int(m.group(2)) if m.group(2) is not None else 1
            new_start = int(m.group(3))
            new_count = int(m.group(4)) if m.group(4) is not None else 1
            if new_count == 0:
                new_start = max(new_start, 1)
            elif new_start < 1:
                raise ParseError(f"hunk with {new_count} new lines starts at 0", lineno)
            hunks.append(DiffHunk(new_path or old_path, new_start, new_count))
            old_left, new_left = old_count, new_count
            continue
        if line.startswith("Binary files") or line.startswith("GIT binary patch"):
            old_path = new_path = None
            have_file = False
            continue
        if line.startswith(_METADATA):
            continue
        raise ParseError(f"unexpected line {line!r}", lineno)

    if old_left > 0 or new_left > 0:
        raise ParseError("stream ended inside a hunk body")
    flush()
    return commits


def attribute_hunks_to_functions(
    hunks: Sequence[DiffHunk], spans: SpanTable, commit_id: str
) -> frozenset[str]:
    """Functions whose span at ``commit_id`` intersects any hunk's new range.

    Hunks on files with no span entry contribute nothing here; see
    :func:`unattributed_files`.
    """
    touched: set[str] = set()
    for hunk in hunks:
        lo, hi = hunk.new_range
        touched.update(spans.overlapping(commit_id, hunk.path, lo, hi))
    return frozenset(touched)


def unattributed_files(hunks: Sequence[DiffHunk], spans: SpanTable, commit_id: str) -> frozenset[str]:
    return frozenset(h.path for h in hunks if (commit_id, h.path) not in spans)


def build_change_history(parsed: Iterable[ParsedCommit], spans: SpanTable) -> ChangeHistory:
    records = []
    for commit in parsed:
        records.append(
            CommitRecord(
                commit.id,
                commit.timestamp,
                touched_functions=attribute_hunks_to_functions(commit.hunks, spans, commit.id),
                touched_files=frozenset(h.path for h in commit.hunks),
                fallback_files=unattributed_files(commit.hunks, spans, commit.id),
            )
        )
    return ChangeHistory(records)
