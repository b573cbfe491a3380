"""Dependent sets, co-change sets, and the Jaccard similarity matrices."""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import AbstractSet, Hashable, Sequence

import numpy as np

from largeactive.errors import AnalysisError, ConfigurationError, UnknownTargetError
from largeactive.model import (
    AnalysisConfig,
    ChangeHistory,
    DependencyMode,
    FactsDb,
    FileRef,
    RectSimilarityMatrix,
    SimilarityMatrix,
    as_file,
)


@dataclass(frozen=True)
class DependentSet:
    function_id: str
    mode: DependencyMode
    members: frozenset[FileRef]


@dataclass(frozen=True)
class CoChangeSet:
    function_id: str
    members: frozenset[str]


def jaccard(a: AbstractSet[Hashable], b: AbstractSet[Hashable]) -> float:
    """|a & b| / |a | b|, with 0.0 for two empty sets."""
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def target_functions(db: FactsDb, target_file: FileRef | str) -> tuple[str, ...]:
    target = as_file(target_file)
    if not db.has_file(target):
        raise UnknownTargetError(f"unknown target file {target.path!r}")
    return db.functions_in(target)


def _direct(db: FactsDb, target: FileRef, t: str) -> set[FileRef]:
    return {db.file_of[c] for c in db.callers_of(t)} - {target}


def _transitive(db: FactsDb, target: FileRef, t: str) -> set[FileRef]:
    # walk callers backwards; only functions inside the target file may relay a path
    found: set[FileRef] = set()
    seen = {t}
    queue = deque([t])
    while queue:
        node = queue.popleft()
        for caller in sorted(db.callers_of(node)):
            file = db.file_of[caller]
            if file != target:
                found.add(file)
            elif caller not in seen:
                seen.add(caller)
                queue.append(caller)
    return found


def _cochange(db: FactsDb, history: ChangeHistory, target: FileRef, t: str) -> set[FileRef]:
    found: set[FileRef] = set()
    for cid in history.commits_of(t):
        for fid in history.commit(cid).touched_functions:
            file = db.file_of.get(fid)
            if file is not None and file != target:
                found.add(file)
    return found


def dependent_set(
    db: FactsDb,
    history: ChangeHistory | None,
    target_file: FileRef | str,
    t: str,
    mode: DependencyMode | str = DependencyMode.TRANSITIVE,
) -> DependentSet:
    """Files outside ``target_file`` that depend on target function ``t``.

    ``direct`` counts files with a caller of ``t``. ``transitive`` also counts
    files reaching ``t`` through a call chain whose intermediate functions all
    live in the target file. ``cochange`` counts files holding a function that
    changed in at least one commit with ``t``. ``union`` is all three.
    """
    mode = DependencyMode(mode)
    target = as_file(target_file)
    if t not in db or db.file_of[t] != target:
        raise ValueError(f"function {t!r} is not in target file {target.path!r}")
    if mode.needs_history and history is None:
        raise ConfigurationError(f"dependency mode {mode.value!r} requires a change history")

    if mode is DependencyMode.DIRECT:
        members = _direct(db, target, t)
    elif mode is DependencyMode.TRANSITIVE:
        members = _transitive(db, target, t)
    elif mode is DependencyMode.COCHANGE:
        members = _cochange(db, history, target, t)
    else:
        members = _direct(db, target, t) | _transitive(db, target, t) | _cochange(db, history, target, t)
    return DependentSet(t, mode, frozenset(members))


def cochange_set(history: ChangeHistory, f: str, since: int | None = None) -> CoChangeSet:
    commits = history.commits_of(f)
    if since is not None:
        commits = frozenset(c for c in commits if history.commit(c).timestamp >= since)
    return CoChangeSet(f, commits)


def _pairwise(
    row_sets: Sequence[AbstractSet],
    col_sets: Sequence[AbstractSet],
    workers: int,
    symmetric: bool,
) -> np.ndarray:
    out = np.zeros((len(row_sets), len(col_sets)))

    def fill(i: int) -> None:
        start = i + 1 if symmetric else 0
        for j in range(start, len(col_sets)):
            out[i, j] = jaccard(row_sets[i], col_sets[j])

    if workers > 1 and len(row_sets) > 1:
        # each row writes disjoint cells, so the result matches the serial loop exactly
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(len(row_sets))))
    else:
        for i in range(len(row_sets)):
            fill(i)
    if symmetric:
        out = out + out.T
    return out


def split_similarity(
    db: FactsDb,
    history: ChangeHistory | None,
    target_file: FileRef | str,
    config: AnalysisConfig = AnalysisConfig(),
) -> SimilarityMatrix:
    """Jaccard similarity of dependent sets over the target file's functions.

    Labels are the function ids in sorted order; the diagonal is zero. An
    all-zero result is returned as-is and reports ``no_signal``.
    """
    labels = target_functions(db, target_file)
    if len(labels) < 2:
        raise AnalysisError(f"target too small: {len(labels)} function(s) in {as_file(target_file).path}")
    if history is not None:
        history = history.since(config.since)
    sets = [
        dependent_set(db, history, target_file, t, config.dependency_mode).members for t in labels
    ]
    entries = _pairwise(sets, sets, config.workers, symmetric=True)
    return SimilarityMatrix(labels, entries)


def dependent_files(
    db: FactsDb,
    history: ChangeHistory | None,
    target_file: FileRef | str,
    mode: DependencyMode | str,
) -> frozenset[FileRef]:
    """The dependent-file universe D of the target file under ``mode``."""
    files: set[FileRef] = set()
    for t in target_functions(db, target_file):
        files |= dependent_set(db, history, target_file, t, mode).members
    return frozenset(files)


def redraw_similarity(
    db: FactsDb,
    history: ChangeHistory,
    target_file: FileRef | str,
    config: AnalysisConfig = AnalysisConfig(),
) -> RectSimilarityMatrix:
    """Jaccard similarity of commit sets, target functions against client functions.

    Rows are target functions that changed at least once. Columns are the
    functions of dependent files that share at least one commit with some
    row; whether they call the target is irrelevant.
    """
    target = as_file(target_file)
    functions = target_functions(db, target)
    if len(functions) < 2:
        raise AnalysisError(f"target too small: {len(functions)} function(s) in {target.path}")
    history = history.since(config.since)

    rows = [t for t in functions if history.commits_of(t)]
    row_commits: set[str] = set()
    for t in rows:
        row_commits |= history.commits_of(t)

    cols = []
    for file in sorted(dependent_files(db, history, target, config.dependency_mode)):
        for d in db.functions_in(file):
            if history.commits_of(d) & row_commits:
                cols.append(d)
    if len(rows) < 2 or len(cols) < 2:
        raise AnalysisError(
            f"insufficient history: {len(rows)} changed target function(s), "
            f"{len(cols)} co-changing client function(s)"
        )
    cols.sort()
    entries = _pairwise(
        [history.commits_of(t) for t in rows],
        [history.commits_of(d) for d in cols],
        config.workers,
        symmetric=False,
    )
    return RectSimilarityMatrix(tuple(rows), tuple(cols), entries)

