"""Bipartite spectral co-clustering of the target/client similarity matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from largeactive.errors import AnalysisError, NumericError
from largeactive.model import AnalysisConfig, RectSimilarityMatrix, canonical_assignment
from largeactive.spectral import RESIDUAL_LIMIT, fix_signs, kmeans_deterministic, rank_gaps

ROW = "row"
COL = "col"


@dataclass(frozen=True)
class CoPartition:
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    assignment: Mapping[str, int] = field(hash=False)
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "assignment", MappingProxyType(dict(self.assignment)))

    def side(self, label: str) -> str:
        return ROW if label in set(self.row_labels) else COL

    @property
    def k(self) -> int:
        return len(set(self.assignment.values()))

    def clusters(self) -> list[tuple[frozenset[str], frozenset[str]]]:
        """``(row members, column members)`` per cluster index."""
        rows: list[set[str]] = [set() for _ in range(self.k)]
        cols: list[set[str]] = [set() for _ in range(self.k)]
        for label in self.row_labels:
            rows[self.assignment[label]].add(label)
        for label in self.col_labels:
            cols[self.assignment[label]].add(label)
        return [(frozenset(r), frozenset(c)) for r, c in zip(rows, cols)]


@dataclass(frozen=True, eq=False)
class SingularTriplets:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def singular_triplets(A, count: int | None = None) -> SingularTriplets:
    """Leading singular triplets, descending, with the sign of each ``u`` fixed.

    ``v`` is flipped together with ``u`` so ``A v = sigma u`` keeps holding.
    """
    A = np.asarray(A, dtype=float)
    full = min(A.shape)
    count = full if count is None else count
    if not 1 <= count <= full:
        raise ValueError(f"count must be in [1, {full}], got {count}")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from None
    U, s, V = U[:, :count], s[:count], Vt[:count].T
    fixed = fix_signs(U)
    flip = np.where(np.all(np.isclose(fixed, U, rtol=0, atol=0), axis=0), 1.0, -1.0)
    U, V = fixed, V * flip
    scale = max(1.0, float(s[0]) if s.size else 1.0)
    residual = max(
        float(np.linalg.norm(A @ V - U * s, axis=0).max(initial=0.0)),
        float(np.linalg.norm(A.T @ U - V * s, axis=0).max(initial=0.0)),
    )
    if residual > RESIDUAL_LIMIT * scale:
        raise NumericError("singular triplet residual above limit", residual)
    return SingularTriplets(U, s, V)


def normalized_bipartite(entries: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``D1^-1/2 A D2^-1/2`` plus the two inverse-sqrt degree vectors."""
    r = 1.0 / np.sqrt(entries.sum(axis=1))
    c = 1.0 / np.sqrt(entries.sum(axis=0))
    return r[:, None] * entries * c[None, :], r, c


def _drop_empty(S: RectSimilarityMatrix):
    A = S.entries
    rmask = A.sum(axis=1) > 0
    cmask = A.sum(axis=0) > 0
    rkeep, ckeep = np.flatnonzero(rmask), np.flatnonzero(cmask)
    dropped = tuple(S.row_labels[i] for i in np.flatnonzero(~rmask)) + tuple(
        S.col_labels[j] for j in np.flatnonzero(~cmask)
    )
    return (
        A[np.ix_(rkeep, ckeep)],
        tuple(S.row_labels[i] for i in rkeep),
        tuple(S.col_labels[j] for j in ckeep),
        dropped,
    )


def singular_gap_guesses(singular_values, q_max: int, n_min: int, tol: float = 1e-9) -> list[int]:
    """Cluster counts ``k`` in ``[2, n_min-1]`` ranked by ``sigma[k] - sigma[k+1]``."""
    if n_min < 3:
        raise AnalysisError(f"too few rows or columns for model selection: {n_min}")
    sigma = np.asarray(singular_values, dtype=float)
    if sigma.size < n_min:
        raise ValueError(f"need {n_min} singular values, got {sigma.size}")
    gaps = {k: float(sigma[k - 1] - sigma[k]) for k in range(2, n_min)}
    return rank_gaps(gaps, q_max, tol)


def bipartite_spectrum(S: RectSimilarityMatrix) -> np.ndarray:
    """Singular values of the normalized matrix after dropping empty rows/columns."""
    A, _, _, _ = _drop_empty(S)
    if A.size == 0:
        raise AnalysisError("insufficient structure: matrix has no non-zero entry")
    An, _, _ = normalized_bipartite(A)
    return singular_triplets(An).sigma


def cocluster_partition(
    S: RectSimilarityMatrix, k: int, config: AnalysisConfig = AnalysisConfig()
) -> CoPartition:
    """Co-cluster rows and columns of ``S`` into ``k`` groups.

    Uses ``ceil(log2 k) + 1`` leading singular vectors of the degree-normalized
    matrix minus the trivial first one, scales rows and columns back by their
    degrees and runs k-means on the stacked embedding. All-zero rows or
    columns are left out and listed in ``dropped``.

    The trivial pair (``D1^1/2 1``, ``D2^1/2 1``, singular value 1) is
    deflated explicitly rather than taken from the solver, since on a
    disconnected matrix the solver's first vector is an arbitrary member of a
    repeated singular value. For the same reason the embedding widens past
    ``ceil(log2 k)`` vectors when the cut-off falls inside a group of equal
    singular values.
    """
    A, rows, cols, dropped = _drop_empty(S)
    limit = min(len(rows), len(cols))
    if not 2 <= k <= limit:
        raise ValueError(f"k must be in [2, {limit}], got {k}")
    An, r, c = normalized_bipartite(A)
    u0 = np.sqrt(A.sum(axis=1))
    v0 = np.sqrt(A.sum(axis=0))
    u0, v0 = u0 / np.linalg.norm(u0), v0 / np.linalg.norm(v0)
    rest = singular_triplets(An - np.outer(u0, v0))
    if rest.sigma[0] <= config.eig_tolerance:
        raise AnalysisError("insufficient structure: normalized matrix has rank < 2")
    width = math.ceil(math.log2(k))
    while width < rest.sigma.size and rest.sigma[width - 1] - rest.sigma[width] <= config.eig_tolerance:
        width += 1
    Z = np.vstack([r[:, None] * rest.U[:, :width], c[:, None] * rest.V[:, :width]])
    raw = kmeans_deterministic(Z, k, config.seed, config.kmeans_max_iter)
    labels = rows + cols
    return CoPartition(rows, cols, dict(zip(labels, canonical_assignment(raw))), dropped)
