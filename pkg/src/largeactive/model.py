"""Shared domain types: facts, change history, similarity matrices, recommendations."""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from largeactive.errors import ConfigurationError, ValidationError


@dataclass(frozen=True, order=True)
class FileRef:
    path: str

    def __post_init__(self):
        object.__setattr__(self, "path", normalize_path(self.path))

    def __str__(self) -> str:
        return self.path


def normalize_path(path: str) -> str:
    """Repository-relative path with forward slashes and no leading ``./``."""
    path = path.replace("\\", "/")
    while path.startswith("./"):
        path = path[2:]
    return path


def as_file(file: FileRef | str) -> FileRef:
    return file if isinstance(file, FileRef) else FileRef(file)


@dataclass(frozen=True)
class FunctionRef:
    id: str
    file: FileRef
    qualified_name: str
    span: tuple[int, int] | None = None

    @property
    def start_line(self) -> int | None:
        return self.span[0] if self.span else None

    @property
    def end_line(self) -> int | None:
        return self.span[1] if self.span else None


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        text = f"{self.rule}: {self.subject}"
        return f"{text} ({self.detail})" if self.detail else text


class FactsDb:
    """Immutable snapshot of functions, their files, and call edges.

    Construction never fails on bad data; call :func:`validate_facts` to get
    the list of broken invariants. Loaders do that and raise.
    """

    def __init__(
        self,
        functions: Iterable[FunctionRef],
        calls: Iterable[tuple[str, str]] = (),
        files: Iterable[FileRef] | None = None,
    ):
        self._functions = tuple(sorted(functions, key=lambda f: f.id))
        self._calls = frozenset((str(a), str(b)) for a, b in calls)
        if files is None:
            files = {f.file for f in self._functions}
        self._files = tuple(sorted(files))

        by_id: dict[str, FunctionRef] = {}
        for f in self._functions:
            by_id.setdefault(f.id, f)
        self._by_id = MappingProxyType(by_id)
        self._file_of = MappingProxyType({fid: f.file for fid, f in by_id.items()})

        in_file: dict[FileRef, list[str]] = defaultdict(list)
        for fid, f in by_id.items():
            in_file[f.file].append(fid)
        self._in_file = {k: tuple(sorted(v)) for k, v in in_file.items()}

        callers: dict[str, set[str]] = defaultdict(set)
        callees: dict[str, set[str]] = defaultdict(set)
        for a, b in self._calls:
            callers[b].add(a)
            callees[a].add(b)
        self._callers = {k: frozenset(v) for k, v in callers.items()}
        self._callees = {k: frozenset(v) for k, v in callees.items()}

    @property
    def functions(self) -> tuple[FunctionRef, ...]:
        return self._functions

    @property
    def files(self) -> tuple[FileRef, ...]:
        return self._files

    @property
    def calls(self) -> frozenset[tuple[str, str]]:
        return self._calls

    @property
    def file_of(self) -> Mapping[str, FileRef]:
        return self._file_of

    def function(self, fid: str) -> FunctionRef:
        return self._by_id[fid]

    def __contains__(self, fid: object) -> bool:
        return fid in self._by_id

    def has_file(self, file: FileRef | str) -> bool:
        return as_file(file) in self._in_file or as_file(file) in self._files

    def functions_in(self, file: FileRef | str) -> tuple[str, ...]:
        """Ids of the functions defined in ``file``, sorted."""
        return self._in_file.get(as_file(file), ())

    def callers_of(self, fid: str) -> frozenset[str]:
        return self._callers.get(fid, frozenset())

    def callees_of(self, fid: str) -> frozenset[str]:
        return self._callees.get(fid, frozenset())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FactsDb):
            return NotImplemented
        return (
            self._functions == other._functions
            and self._calls == other._calls
            and self._files == other._files
        )

    def __hash__(self) -> int:
        return hash((self._functions, self._calls, self._files))

    def __repr__(self) -> str:
        return (
            f"FactsDb({len(self._functions)} functions, {len(self._files)} files, "
            f"{len(self._calls)} calls)"
        )


def validate_facts(db: FactsDb) -> list[Violation]:
    """Return one violation per broken FactsDb invariant; empty when valid."""
    report: list[Violation] = []
    seen: set[str] = set()
    for f in db.functions:
        if f.id in seen:
            report.append(Violation("duplicate-function-id", f.id))
        seen.add(f.id)
        if not f.id:
            report.append(Violation("empty-function-id", repr(f.qualified_name)))
        if f.span is not None:
            start, end = f.span
            if start < 1 or end < 1 or start > end:
                report.append(Violation("bad-span", f.id, f"{start}..{end}"))

    file_set = set(db.files)
    seen_paths: set[str] = set()
    for file in db.files:
        if not file.path:
            report.append(Violation("empty-file-path", repr(file.path)))
        if file.path in seen_paths:
            report.append(Violation("duplicate-file-path", file.path))
        seen_paths.add(file.path)
    for f in db.functions:
        if f.file not in file_set:
            report.append(Violation("unknown-file", f.id, f.file.path))

    for caller, callee in sorted(db.calls):
        for end in (caller, callee):
            if end not in seen:
                report.append(Violation("dangling-edge", end, f"{caller} -> {callee}"))
        if caller == callee:
            report.append(Violation("self-edge", caller))
    return report


@dataclass(frozen=True)
class CommitRecord:
    id: str
    timestamp: int
    touched_functions: frozenset[str] = frozenset()
    touched_files: frozenset[str] = frozenset()
    # files whose hunks could not be attributed to functions (no span entry)
    fallback_files: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "touched_functions", frozenset(self.touched_functions))
        object.__setattr__(
            self, "touched_files", frozenset(normalize_path(p) for p in self.touched_files)
        )
        object.__setattr__(
            self, "fallback_files", frozenset(normalize_path(p) for p in self.fallback_files)
        )

    @property
    def flagged(self) -> bool:
        return bool(self.fallback_files)


class ChangeHistory:
    """Commits in canonical order: timestamp ascending, ties by id."""

    def __init__(self, commits: Iterable[CommitRecord] = ()):
        commits = sorted(commits, key=lambda c: (c.timestamp, c.id))
        counts = Counter(c.id for c in commits)
        dupes = sorted(i for i, n in counts.items() if n > 1)
        if dupes:
            raise ValidationError(Violation("duplicate-commit-id", i) for i in dupes)
        self._commits = tuple(commits)

        by_function: dict[str, list[str]] = defaultdict(list)
        by_file: dict[str, int] = defaultdict(int)
        for c in self._commits:
            for fid in c.touched_functions:
                by_function[fid].append(c.id)
            for path in c.touched_files:
                by_file[path] += 1
        self._by_function = {k: frozenset(v) for k, v in by_function.items()}
        self._by_file = dict(by_file)
        self._by_id = {c.id: c for c in self._commits}

    @property
    def commits(self) -> tuple[CommitRecord, ...]:
        return self._commits

    def __len__(self) -> int:
        return len(self._commits)

    def __iter__(self):
        return iter(self._commits)

    def commit(self, cid: str) -> CommitRecord:
        return self._by_id[cid]

    def commits_of(self, fid: str) -> frozenset[str]:
        """Ids of the commits that touched function ``fid``."""
        return self._by_function.get(fid, frozenset())

    def file_commit_count(self, path: FileRef | str) -> int:
        return self._by_file.get(as_file(path).path, 0)

    def known_functions(self) -> frozenset[str]:
        return frozenset(self._by_function)

    def since(self, timestamp: int | None) -> ChangeHistory:
        """Commits at or after ``timestamp``; the same object when None."""
        if timestamp is None:
            return self
        return ChangeHistory(c for c in self._commits if c.timestamp >= timestamp)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChangeHistory):
            return NotImplemented
        return self._commits == other._commits

    def __hash__(self) -> int:
        return hash(self._commits)

    def __repr__(self) -> str:
        return f"ChangeHistory({len(self._commits)} commits)"


def reconcile(history: ChangeHistory, db: FactsDb) -> list[str]:
    """Function ids touched in ``history`` that ``db`` does not know, sorted."""
    return sorted(fid for fid in history.known_functions() if fid not in db)


def _frozen_array(values, shape_check) -> np.ndarray:
    arr = np.array(values, dtype=float)
    shape_check(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Square, symmetric, [0, 1]-valued affinity over target functions (zero diagonal)."""

    labels: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        n = len(labels)

        def check(arr):
            if arr.shape != (n, n):
                raise ValidationError(
                    [Violation("shape", f"{arr.shape}", f"expected ({n}, {n})")]
                )

        entries = _frozen_array(self.entries, check)
        problems = []
        if len(set(labels)) != n:
            problems.append(Violation("duplicate-label", "labels"))
        if not np.all(np.isfinite(entries)):
            problems.append(Violation("non-finite", "entries"))
        elif entries.size and (entries.min() < 0.0 or entries.max() > 1.0):
            problems.append(Violation("out-of-range", "entries", "must lie in [0, 1]"))
        if not np.array_equal(entries, entries.T):
            problems.append(Violation("asymmetric", "entries"))
        if np.any(np.diag(entries) != 0.0):
            problems.append(Violation("nonzero-diagonal", "entries"))
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def no_signal(self) -> bool:
        """True when every entry is zero (no function shares anything)."""
        return not np.any(self.entries)


@dataclass(frozen=True, eq=False)
class RectSimilarityMatrix:
    """Target functions (rows) against client functions (columns), values in [0, 1]."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        rows, cols = tuple(self.row_labels), tuple(self.col_labels)

        def check(arr):
            if arr.shape != (len(rows), len(cols)):
                raise ValidationError(
                    [Violation("shape", f"{arr.shape}", f"expected ({len(rows)}, {len(cols)})")]
                )

        entries = _frozen_array(self.entries, check)
        problems = []
        if set(rows) & set(cols):
            problems.append(Violation("row-col-overlap", ", ".join(sorted(set(rows) & set(cols)))))
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            problems.append(Violation("duplicate-label", "labels"))
        if not np.all(np.isfinite(entries)):
            problems.append(Violation("non-finite", "entries"))
        elif entries.size and (entries.min() < 0.0 or entries.max() > 1.0):
            problems.append(Violation("out-of-range", "entries", "must lie in [0, 1]"))
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


class Kind(str, enum.Enum):
    SPLIT = "split"
    REDRAW = "redraw"


class DependencyMode(str, enum.Enum):
    DIRECT = "direct"
    TRANSITIVE = "transitive"
    COCHANGE = "cochange"
    UNION = "union"

    @property
    def needs_history(self) -> bool:
        return self in (DependencyMode.COCHANGE, DependencyMode.UNION)


@dataclass(frozen=True)
class Recommendation:
    kind: Kind
    target_members: frozenset[str]
    client_members: frozenset[str] = frozenset()
    multiplicity: int = 1
    avg_change_freq: float = 0.0
    source_params: tuple[int, ...] = (1,)

    def __post_init__(self):
        object.__setattr__(self, "target_members", frozenset(self.target_members))
        object.__setattr__(self, "client_members", frozenset(self.client_members))
        object.__setattr__(self, "source_params", tuple(self.source_params))
        if self.multiplicity < 1 or self.multiplicity != len(self.source_params):
            raise ValueError(
                f"multiplicity {self.multiplicity} must be >= 1 and match "
                f"{len(self.source_params)} source params"
            )
        if self.kind is Kind.SPLIT and self.client_members:
            raise ValueError("split recommendations have no client members")
        if self.avg_change_freq < 0:
            raise ValueError("avg_change_freq must be non-negative")

    @property
    def members(self) -> frozenset[str]:
        return self.target_members | self.client_members

    @property
    def size(self) -> int:
        return len(self.target_members) + len(self.client_members)

    @property
    def single_side(self) -> bool:
        """A redraw co-cluster that lives entirely on one side of the interface."""
        return self.kind is Kind.REDRAW and not (self.target_members and self.client_members)

    def sort_key(self) -> tuple:
        return (-self.multiplicity, -self.avg_change_freq, tuple(sorted(self.members)))


@dataclass(frozen=True)
class AnalysisConfig:
    dependency_mode: DependencyMode = DependencyMode.TRANSITIVE
    q_max: int = 3
    min_cluster_size: int = 2
    seed: int = 0
    eig_tolerance: float = 1e-9
    kmeans_max_iter: int = 300
    since: int | None = None
    # worker threads for similarity rows; results do not depend on it
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "dependency_mode", DependencyMode(self.dependency_mode))
        if self.q_max < 1:
            raise ConfigurationError(f"q_max must be >= 1, got {self.q_max}")
        if self.min_cluster_size < 2:
            raise ConfigurationError(
                f"min_cluster_size must be >= 2, got {self.min_cluster_size}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.eig_tolerance <= 0:
            raise ConfigurationError("eig_tolerance must be positive")
        if self.kmeans_max_iter < 1:
            raise ConfigurationError("kmeans_max_iter must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def as_dict(self) -> dict:
        return {
            "dependency_mode": self.dependency_mode.value,
            "q_max": self.q_max,
            "min_cluster_size": self.min_cluster_size,
            "seed": self.seed,
            "eig_tolerance": self.eig_tolerance,
            "kmeans_max_iter": self.kmeans_max_iter,
            "since": self.since,
        }


@dataclass(frozen=True)
class Partition:
    """Assignment of labels to clusters ``0..k-1``, every cluster non-empty."""

    labels: tuple[str, ...]
    assignment: Mapping[str, int] = field(hash=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        assignment = dict(self.assignment)
        if set(assignment) != set(labels) or len(set(labels)) != len(labels):
            raise ValueError("every label must be assigned exactly once")
        used = set(assignment.values())
        if used != set(range(len(used))):
            raise ValueError("cluster indices must be 0..k-1 with no empty cluster")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "assignment", MappingProxyType(assignment))

    @property
    def k(self) -> int:
        return len(set(self.assignment.values()))

    def clusters(self) -> list[frozenset[str]]:
        groups: list[set[str]] = [set() for _ in range(self.k)]
        for label in self.labels:
            groups[self.assignment[label]].add(label)
        return [frozenset(g) for g in groups]

    @classmethod
    def from_groups(cls, groups: Sequence[Iterable[str]]) -> Partition:
        labels: list[str] = []
        assignment: dict[str, int] = {}
        for i, group in enumerate(groups):
            for label in sorted(group):
                labels.append(label)
                assignment[label] = i
        return cls(tuple(labels), assignment)


def canonical_assignment(raw: Sequence[int]) -> list[int]:
    """Renumber cluster ids by first appearance so equal partitions compare equal."""
    mapping: dict[int, int] = {}
    return [mapping.setdefault(int(c), len(mapping)) for c in raw]
