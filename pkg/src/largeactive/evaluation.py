"""Synthetic ground truth and recovery scoring.

``generate_planted`` builds a target file whose functions split into known
responsibilities, each with its own clients and its own commits, so the
recommenders can be scored against the planted groups.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from largeactive.ingest import ParsedCommit
from largeactive.model import (
    ChangeHistory,
    CommitRecord,
    FactsDb,
    FileRef,
    FunctionRef,
    Recommendation,
)

TARGET_PATH = "src/Target.x"
BASE_TIMESTAMP = 1_600_000_000


@dataclass(frozen=True)
class PlantedSpec:
    n_responsibilities: int
    funcs_per_responsibility: int
    clients_per_responsibility: int
    n_commits_per_responsibility: int
    noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        counts = (
            self.n_responsibilities,
            self.funcs_per_responsibility,
            self.clients_per_responsibility,
            self.n_commits_per_responsibility,
        )
        if min(counts) < 1:
            raise ValueError(f"all counts must be >= 1, got {counts}")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError(f"noise_rate must be in [0, 1], got {self.noise_rate}")


@dataclass(frozen=True)
class PlantedTruth:
    target_file: FileRef
    target_groups: tuple[frozenset[str], ...]
    client_groups: tuple[frozenset[str], ...]

    def groups(self, with_clients: bool = False) -> list[frozenset[str]]:
        if not with_clients:
            return list(self.target_groups)
        return [t | c for t, c in zip(self.target_groups, self.client_groups)]

    def labels(self, with_clients: bool = False) -> dict[str, int]:
        return {f: i for i, g in enumerate(self.groups(with_clients)) for f in g}


def target_id(r: int, j: int) -> str:
    return f"{TARGET_PATH}#r{r}_f{j}"


def client_path(r: int, c: int) -> str:
    return f"src/clients/r{r}/Client{c}.x"


def client_id(r: int, c: int) -> str:
    return f"{client_path(r, c)}#use"


def generate_planted(spec: PlantedSpec) -> tuple[FactsDb, ChangeHistory, PlantedTruth]:
    """Facts, history and ground truth for ``spec``; fully determined by the seed.

    Each client file holds one function that calls every target function of
    its responsibility. Each commit touches all target and client functions of
    one responsibility. With probability ``noise_rate`` each call edge and
    each touch gains one extra partner drawn uniformly from the other
    responsibilities.
    """
    rng = np.random.default_rng(spec.seed)
    n, m, nc = spec.n_responsibilities, spec.funcs_per_responsibility, spec.clients_per_responsibility
    target = FileRef(TARGET_PATH)

    functions = []
    line = 1
    for r in range(n):
        for j in range(m):
            functions.append(FunctionRef(target_id(r, j), target, f"r{r}_f{j}", (line, line + 9)))
            line += 10
    for r in range(n):
        for c in range(nc):
            functions.append(FunctionRef(client_id(r, c), FileRef(client_path(r, c)), "use", (1, 20)))

    def other_target(r: int) -> str:
        rr = int(rng.choice([x for x in range(n) if x != r]))
        return target_id(rr, int(rng.integers(m)))

    def other_any(r: int) -> str:
        rr = int(rng.choice([x for x in range(n) if x != r]))
        pick = int(rng.integers(m + nc))
        return target_id(rr, pick) if pick < m else client_id(rr, pick - m)

    calls = set()
    for r in range(n):
        for c in range(nc):
            for j in range(m):
                calls.add((client_id(r, c), target_id(r, j)))
                if n > 1 and rng.random() < spec.noise_rate:
                    calls.add((client_id(r, c), other_target(r)))

    owners = [r for r in range(n) for _ in range(spec.n_commits_per_responsibility)]
    owners = [owners[i] for i in rng.permutation(len(owners))]
    commits = []
    for i, r in enumerate(owners):
        touched = {target_id(r, j) for j in range(m)} | {client_id(r, c) for c in range(nc)}
        if n > 1:
            for _ in range(len(touched)):
                if rng.random() < spec.noise_rate:
                    touched.add(other_any(r))
        cid = hashlib.sha1(f"{spec.seed}:{i}".encode()).hexdigest()[:12]
        files = {f.split("#", 1)[0] for f in touched}
        commits.append(CommitRecord(cid, BASE_TIMESTAMP + 3600 * i, frozenset(touched), frozenset(files)))

    truth = PlantedTruth(
        target,
        tuple(frozenset(target_id(r, j) for j in range(m)) for r in range(n)),
        tuple(frozenset(client_id(r, c) for c in range(nc)) for r in range(n)),
    )
    return FactsDb(functions, calls), ChangeHistory(commits), truth


def adjusted_rand_index(a: Mapping[str, int], b: Mapping[str, int]) -> float:
    """Adjusted Rand index of two labelings over the same label universe."""
    if set(a) != set(b):
        raise ValueError("partitions cover different label universes")
    labels = sorted(a)
    n = len(labels)
    if n < 2:
        return 1.0
    pairs = Counter((a[x], b[x]) for x in labels)
    sum_ij = sum(comb(v, 2) for v in pairs.values())
    sum_a = sum(comb(v, 2) for v in Counter(a[x] for x in labels).values())
    sum_b = sum(comb(v, 2) for v in Counter(b[x] for x in labels).values())
    expected = sum_a * sum_b / comb(n, 2)
    top = (sum_a + sum_b) / 2
    if top == expected:
        # both labelings trivial in the same way (all singletons or one block)
        return 1.0
    return (sum_ij - expected) / (top - expected)


def cover_partition(member_sets: Iterable[frozenset[str]], universe: Iterable[str]) -> dict[str, int]:
    """Greedy partition from ranked member sets.

    Walk the sets in order, keep each one disjoint from everything kept so
    far, and leave uncovered labels as singletons.
    """
    universe = sorted(universe)
    allowed = set(universe)
    assignment: dict[str, int] = {}
    for members in member_sets:
        members = members & allowed
        if not members or any(m in assignment for m in members):
            continue
        block = len(set(assignment.values()))
        for m in members:
            assignment[m] = block
    nxt = len(set(assignment.values()))
    for label in universe:
        if label not in assignment:
            assignment[label] = nxt
            nxt += 1
    return assignment


@dataclass(frozen=True)
class RecoveryReport:
    ari: float
    exact: tuple[bool, ...]

    @property
    def all_exact(self) -> bool:
        return all(self.exact)


def recovery_report(
    recommendations: Sequence[Recommendation] | Sequence[frozenset[str]],
    truth: Sequence[frozenset[str]],
) -> RecoveryReport:
    """Best-match ARI and per-group exact recovery.

    The ARI compares the ground truth to the partition obtained by greedily
    covering its labels with the recommendations in ranked order.
    """
    sets = [r.members if isinstance(r, Recommendation) else frozenset(r) for r in recommendations]
    truth = [frozenset(g) for g in truth]
    exact = tuple(g in set(sets) for g in truth)
    if not sets:
        return RecoveryReport(0.0, exact)
    universe = set().union(*truth)
    truth_labels = {f: i for i, g in enumerate(truth) for f in g}
    return RecoveryReport(adjusted_rand_index(truth_labels, cover_partition(sets, universe)), exact)


def render_git_log(commits: Iterable[ParsedCommit]) -> str:
    """Inverse of :func:`largeactive.ingest.parse_git_log_stream` on hunk structure.

    Hunk bodies are synthesized: ``new_count`` added lines, and one removed
    line for pure deletions.
    """
    out: list[str] = []
    for commit in commits:
        out.append(f"commit {commit.id} {commit.timestamp}")
        current = None
        for h in commit.hunks:
            if h.path != current:
                out.append(f"diff --git a/{h.path} b/{h.path}")
                out.append(f"--- a/{h.path}")
                out.append(f"+++ b/{h.path}")
                current = h.path
            old = 1 if h.new_count == 0 else 0
            out.append(f"@@ -{h.new_start},{old} +{h.new_start},{h.new_count} @@")
            out.extend(["-removed"] * old)
            out.extend(["+added"] * h.new_count)
    return "\n".join(out) + ("\n" if out else "")
