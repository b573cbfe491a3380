"""Normalized-cut spectral clustering with eigengap model selection.

Everything here is deterministic: eigenvector signs are fixed, k-means is
seeded by farthest-first traversal, and ties always break toward the lower
index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from largeactive.errors import AnalysisError, NumericError
from largeactive.model import AnalysisConfig, Partition, SimilarityMatrix, canonical_assignment

# residual budget for a returned eigenpair, relative to max(1, ||L||)
RESIDUAL_LIMIT = 1e-7


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True, eq=False)
class Laplacian:
    matrix: np.ndarray
    labels: tuple[str, ...]
    isolated: tuple[str, ...]


def normalized_laplacian(S: SimilarityMatrix) -> Laplacian:
    """``I - D^-1/2 S D^-1/2`` over the labels with non-zero degree.

    Zero-degree labels are dropped and listed in ``isolated``.
    """
    degrees = S.entries.sum(axis=1)
    keep = np.flatnonzero(degrees > 0)
    isolated = tuple(S.labels[i] for i in np.flatnonzero(degrees <= 0))
    if keep.size == 0:
        raise AnalysisError("no signal: every function is isolated in the similarity graph")
    W = S.entries[np.ix_(keep, keep)]
    inv_sqrt = 1.0 / np.sqrt(degrees[keep])
    L = np.eye(keep.size) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    L = (L + L.T) / 2.0
    return Laplacian(L, tuple(S.labels[i] for i in keep), isolated)


def fix_signs(vectors: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Entries within ``atol`` of the maximum magnitude count as tied; the first
    of them decides.
    """
    out = np.array(vectors, dtype=float, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        if mags.size == 0 or mags.max() == 0:
            continue
        pivot = int(np.flatnonzero(mags >= mags.max() - atol)[0])
        if col[pivot] < 0:
            out[:, j] = -col
    return out


def eig_smallest(L: np.ndarray, m: int, tol: float = 1e-9) -> SpectrumResult:
    """The ``m`` smallest eigenpairs of symmetric ``L``, ascending, signs fixed."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if L.ndim != 2 or L.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {L.shape}")
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    scale = max(1.0, float(np.abs(L).max()))
    if np.abs(L - L.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    try:
        values, vectors = np.linalg.eigh((L + L.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition did not converge: {exc}") from None
    values, vectors = values[:m], fix_signs(vectors[:, :m])
    residual = float(np.linalg.norm(L @ vectors - vectors * values, axis=0).max(initial=0.0))
    if residual > RESIDUAL_LIMIT * scale:
        raise NumericError("eigenpair residual above limit", residual)
    return SpectrumResult(values, vectors)


def rank_gaps(gaps: dict[int, float], q_max: int, tol: float) -> list[int]:
    """Order candidate ``k`` by gap size, largest first, ties to the smaller ``k``.

    Gaps no larger than ``tol`` are dropped: at such a ``k`` the leading
    subspace is not unique, so any clustering of it would be arbitrary.
    """
    # quantize so gaps equal up to rounding noise tie exactly
    keyed = [(-round(g / tol), k) for k, g in gaps.items() if g > tol]
    return [k for _, k in sorted(keyed)][:q_max]


def spectral_gap_guesses(
    eigenvalues, q_max: int, n: int, tol: float = 1e-9
) -> list[int]:
    """Cluster counts ``k`` in ``[2, n-1]`` ranked by ``lambda[k+1] - lambda[k]``."""
    if n < 3:
        raise AnalysisError(f"target too small for model selection: {n} connected function(s)")
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size < n:
        raise ValueError(f"need {n} eigenvalues, got {lam.size}")
    # 1-based: gap(k) = lam_{k+1} - lam_k
    gaps = {k: float(lam[k] - lam[k - 1]) for k in range(2, n)}
    return rank_gaps(gaps, q_max, tol)


def kmeans_deterministic(points, k: int, seed: int = 0, max_iter: int = 300) -> list[int]:
    """Lloyd's k-means with farthest-first seeding; returns a cluster index per point.

    ``seed`` is accepted for interface stability and currently unused: the
    seeding starts from the lexicographically smallest point, so runs are
    reproducible without a random generator.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if k == 1:
        return [0] * n

    # np.lexsort treats the last key as primary
    first = int(np.lexsort(X.T[::-1])[0])
    chosen = [first]
    nearest = np.sum((X - X[first]) ** 2, axis=1)
    for _ in range(1, k):
        masked = nearest.copy()
        masked[chosen] = -1.0
        nxt = int(np.argmax(masked))
        chosen.append(nxt)
        nearest = np.minimum(nearest, np.sum((X - X[nxt]) ** 2, axis=1))
    centers = X[chosen].copy()

    assignment = None
    for _ in range(max_iter):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        new = _repair_empty(new, dist, k)
        if assignment is not None and np.array_equal(new, assignment):
            break
        assignment = new
        centers = np.array([X[assignment == c].mean(axis=0) for c in range(k)])
    return [int(c) for c in assignment]


def _repair_empty(assignment: np.ndarray, dist: np.ndarray, k: int) -> np.ndarray:
    assignment = assignment.copy()
    for c in range(k):
        if np.any(assignment == c):
            continue
        counts = np.bincount(assignment, minlength=k)
        own = dist[np.arange(len(assignment)), assignment]
        movable = counts[assignment] > 1
        own = np.where(movable, own, -1.0)
        # farthest point from its center; argmax keeps the first on ties
        assignment[int(np.argmax(own))] = c
    return assignment


def spectral_embedding(lap: Laplacian, k: int, tol: float = 1e-9) -> np.ndarray:
    spectrum = eig_smallest(lap.matrix, k, tol)
    Y = spectrum.eigenvectors
    norms = np.linalg.norm(Y, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return Y / safe[:, None]


def ncut_partition(
    S: SimilarityMatrix, k: int, config: AnalysisConfig = AnalysisConfig()
) -> Partition:
    """Cluster the connected labels of ``S`` into ``k`` groups.

    Isolated labels follow as singleton clusters numbered after the ``k``
    spectral ones.
    """
    lap = normalized_laplacian(S)
    n = len(lap.labels)
    if not 2 <= k <= n - 1:
        raise ValueError(f"k must be in [2, {n - 1}] for {n} connected labels, got {k}")
    Y = spectral_embedding(lap, k, config.eig_tolerance)
    raw = kmeans_deterministic(Y, k, config.seed, config.kmeans_max_iter)
    assignment = dict(zip(lap.labels, canonical_assignment(raw)))
    for i, label in enumerate(lap.isolated):
        assignment[label] = k + i
    return Partition(S.labels, assignment)
