"""Ensemble loops, recommendation ranking, and large-active file detection."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from largeactive.cocluster import bipartite_spectrum, cocluster_partition, singular_gap_guesses
from largeactive.errors import AnalysisError
from largeactive.model import (
    AnalysisConfig,
    ChangeHistory,
    FactsDb,
    FileRef,
    Kind,
    Recommendation,
    as_file,
    reconcile,
)
from largeactive.similarity import redraw_similarity, split_similarity, target_functions
from largeactive.spectral import eig_smallest, ncut_partition, normalized_laplacian, spectral_gap_guesses


@dataclass(frozen=True)
class Candidate:
    """One cluster produced by one clustering run, before aggregation."""

    target_members: frozenset[str]
    client_members: frozenset[str] = frozenset()
    param: int = 0

    @property
    def key(self) -> tuple[frozenset[str], frozenset[str]]:
        return self.target_members, self.client_members

    @property
    def size(self) -> int:
        return len(self.target_members) + len(self.client_members)


@dataclass(frozen=True)
class Diagnostics:
    guesses: tuple[int, ...] = ()
    isolated: tuple[str, ...] = ()
    dropped: tuple[str, ...] = ()
    unknown_functions: tuple[str, ...] = ()
    fallback_commits: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "guesses": list(self.guesses),
            "isolated": list(self.isolated),
            "dropped": list(self.dropped),
            "unknown_functions": list(self.unknown_functions),
            "fallback_commits": list(self.fallback_commits),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class RankedReport:
    target_file: FileRef
    kind: Kind
    recommendations: tuple[Recommendation, ...]
    config: AnalysisConfig
    diagnostics: Diagnostics


def avg_change_frequency(members: Iterable[str], history: ChangeHistory | None) -> float:
    """Mean number of commits per member; members unknown to the history count 0."""
    members = list(members)
    if not members or history is None:
        return 0.0
    return sum(len(history.commits_of(f)) for f in members) / len(members)


def rank_recommendations(
    R: Iterable[Candidate],
    history: ChangeHistory | None,
    kind: Kind = Kind.SPLIT,
) -> list[Recommendation]:
    """Collapse identical member sets and order them.

    Order is multiplicity descending, then average change frequency
    descending, then the sorted member ids ascending.
    """
    params: dict[tuple[frozenset[str], frozenset[str]], list[int]] = defaultdict(list)
    for cand in R:
        params[cand.key].append(cand.param)
    recs = [
        Recommendation(
            kind=kind,
            target_members=targets,
            client_members=clients,
            multiplicity=len(ps),
            avg_change_freq=avg_change_frequency(targets | clients, history),
            source_params=tuple(ps),
        )
        for (targets, clients), ps in params.items()
    ]
    recs.sort(key=Recommendation.sort_key)
    return recs


def _base_diagnostics(db: FactsDb, history: ChangeHistory | None) -> dict:
    if history is None:
        return {}
    return {
        "unknown_functions": tuple(reconcile(history, db)),
        "fallback_commits": tuple(c.id for c in history if c.flagged),
    }


def _keep(cand: Candidate, everything: frozenset[str], config: AnalysisConfig) -> bool:
    return cand.size >= config.min_cluster_size and (cand.target_members | cand.client_members) != everything


def ensemble_split(
    db: FactsDb,
    history: ChangeHistory | None,
    target_file: FileRef | str,
    config: AnalysisConfig = AnalysisConfig(),
) -> RankedReport:
    """Interface splitting: cluster target functions by shared dependents.

    The cluster count of each run comes from the eigengap ranking of the
    normalized Laplacian; clusters from all runs are pooled and ranked.
    """
    target = as_file(target_file)
    functions = target_functions(db, target)
    if len(functions) < 3:
        raise AnalysisError(
            f"target too small for model selection: {len(functions)} function(s) in {target.path}"
        )
    if history is not None:
        history = history.since(config.since)
    S = split_similarity(db, history, target, config)
    lap = normalized_laplacian(S)
    n = len(lap.labels)
    spectrum = eig_smallest(lap.matrix, n, config.eig_tolerance)
    guesses = spectral_gap_guesses(spectrum.eigenvalues, config.q_max, n, config.eig_tolerance)

    everything = frozenset(functions)
    pool = []
    for theta in guesses:
        for cluster in ncut_partition(S, theta, config).clusters():
            cand = Candidate(cluster, frozenset(), theta)
            if _keep(cand, everything, config):
                pool.append(cand)

    notes = []
    if not guesses:
        notes.append("no cluster count has a non-zero spectral gap")
    recs = rank_recommendations(pool, history, Kind.SPLIT)
    if not recs:
        notes.append("no recommendation survived filtering")
    diagnostics = Diagnostics(
        guesses=tuple(guesses), isolated=lap.isolated, notes=tuple(notes), **_base_diagnostics(db, history)
    )
    return RankedReport(target, Kind.SPLIT, tuple(recs), config, diagnostics)


def ensemble_redraw(
    db: FactsDb,
    history: ChangeHistory,
    target_file: FileRef | str,
    config: AnalysisConfig = AnalysisConfig(),
) -> RankedReport:
    """Interface redrawing: co-cluster target and client functions by co-change."""
    target = as_file(target_file)
    history = history.since(config.since)
    S = redraw_similarity(db, history, target, config)
    sigma = bipartite_spectrum(S)
    guesses = singular_gap_guesses(sigma, config.q_max, sigma.size, config.eig_tolerance)

    everything = frozenset(S.row_labels) | frozenset(S.col_labels)
    pool = []
    dropped: tuple[str, ...] = ()
    for theta in guesses:
        part = cocluster_partition(S, theta, config)
        dropped = part.dropped
        for rows, cols in part.clusters():
            cand = Candidate(rows, cols, theta)
            if _keep(cand, everything, config):
                pool.append(cand)

    recs = rank_recommendations(pool, history, Kind.REDRAW)
    notes = []
    if not guesses:
        notes.append("no cluster count has a non-zero singular gap")
    if not recs:
        notes.append("no recommendation survived filtering")
    single = sum(r.single_side for r in recs)
    if single:
        notes.append(f"{single} single-side co-cluster(s) flagged")
    diagnostics = Diagnostics(
        guesses=tuple(guesses), dropped=dropped, notes=tuple(notes), **_base_diagnostics(db, history)
    )
    return RankedReport(target, Kind.REDRAW, tuple(recs), config, diagnostics)


@dataclass(frozen=True)
class FileActivityStats:
    file: FileRef
    fanin_files: int
    commit_count: int
    fanin_rank: int = 0
    change_rank: int = 0

    @property
    def score(self) -> int:
        return max(self.fanin_rank, self.change_rank)


def dense_ranks(values: Sequence[int]) -> list[int]:
    """1-based dense ranks, largest value first."""
    order = {v: i + 1 for i, v in enumerate(sorted(set(values), reverse=True))}
    return [order[v] for v in values]


def rank_stats(raw: Sequence[tuple[FileRef | str, int, int]]) -> list[FileActivityStats]:
    """Stats records from ``(file, fanin_files, commit_count)`` triples, ranks filled in."""
    files = [as_file(f) for f, _, _ in raw]
    fanin = [a for _, a, _ in raw]
    changes = [b for _, _, b in raw]
    return [
        FileActivityStats(f, a, b, fr, cr)
        for f, a, b, fr, cr in zip(files, fanin, changes, dense_ranks(fanin), dense_ranks(changes))
    ]


def file_activity_stats(db: FactsDb, history: ChangeHistory | None) -> list[FileActivityStats]:
    """Fan-in (distinct calling files) and commit count for every file, ranked."""
    clients: dict[FileRef, set[FileRef]] = defaultdict(set)
    for caller, callee in db.calls:
        src, dst = db.file_of[caller], db.file_of[callee]
        if src != dst:
            clients[dst].add(src)
    raw = [
        (f, len(clients.get(f, ())), history.file_commit_count(f) if history is not None else 0)
        for f in db.files
    ]
    return rank_stats(raw)


def detect_large_active(stats: Iterable[FileActivityStats], top_n: int = 10) -> list[FileActivityStats]:
    """Files extreme on both fan-in and change count, best first.

    Score is the worse of the two ranks; ties go to the better fan-in rank,
    then to the path.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    ordered = sorted(stats, key=lambda s: (s.score, s.fanin_rank, s.file.path))
    return ordered[:top_n]
