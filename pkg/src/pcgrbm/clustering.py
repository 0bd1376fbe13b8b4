"""Downstream clustering: K-means (Lloyd + k-means++), spectral clustering on
the symmetric normalized affinity, affinity propagation, and the
constraint-respecting COP-KMeans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .data import ConstraintSet

_MAX_LLOYD_ITER = 300
_JACOBI_TOL = 1e-10
_JACOBI_MAX_SWEEPS = 100


class InfeasibleConstraintsError(ValueError):
    """Raised when an instance has no cluster compatible with the constraints."""

    def __init__(self, instance: int):
        self.instance = int(instance)
        super().__init__(f"no feasible cluster for instance {self.instance}")


class IsolatedPointError(ValueError):
    """Raised when the affinity graph leaves a point with zero degree."""


@dataclass(frozen=True)
class ClusteringResult:
    """Cluster ids (dense, 0..k-1), with convergence bookkeeping."""

    assignments: np.ndarray
    k: int
    converged: bool
    iterations: int

    def __post_init__(self):
        arr = np.asarray(self.assignments, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("assignments must be a non-empty 1-D array")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if arr.min() < 0 or arr.max() >= self.k:
            raise ValueError(f"assignments must lie in 0..{self.k - 1}")
        object.__setattr__(self, "assignments", arr)


@dataclass(frozen=True)
class ApConfig:
    """Affinity propagation knobs; preference is a number or "median"."""

    damping: float = 0.9
    max_iterations: int = 200
    convergence_window: int = 15
    preference: float | str = "median"

    def __post_init__(self):
        if not 0.5 <= self.damping < 1.0:
            raise ValueError(f"damping must lie in [0.5, 1), got {self.damping}")
        if self.max_iterations < 1 or self.convergence_window < 1:
            raise ValueError("max_iterations and convergence_window must be positive")
        if isinstance(self.preference, str) and self.preference != "median":
            raise ValueError(f"preference must be a number or 'median', got {self.preference!r}")


def _pairwise_sq_dists(data: np.ndarray) -> np.ndarray:
    sq = (data**2).sum(axis=1)
    d2 = sq[:, None] - 2.0 * data @ data.T + sq[None, :]
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _dists_to_centroids(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        (data**2).sum(axis=1)[:, None]
        - 2.0 * data @ centroids.T
        + (centroids**2).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((data - data[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0.0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            taken = set(chosen)
            nxt = next(i for i in range(n) if i not in taken)
        chosen.append(nxt)
        d2 = np.minimum(d2, ((data - data[nxt]) ** 2).sum(axis=1))
    return data[chosen].copy()


def _update_centroids(data: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    out = centroids.copy()
    for c in range(centroids.shape[0]):
        members = assignments == c
        if members.any():
            out[c] = data[members].mean(axis=0)
    return out


def _reseed_empty(
    data: np.ndarray,
    assignments: np.ndarray,
    centroids: np.ndarray,
    eligible: np.ndarray,
) -> None:
    """Move the farthest eligible point into each empty cluster (ascending
    cluster order); mutates assignments and centroids."""
    k = centroids.shape[0]
    movable = eligible.copy()
    for c in range(k):
        if (assignments == c).any():
            continue
        dist = ((data - centroids[assignments]) ** 2).sum(axis=1)
        dist[~movable] = -np.inf
        far = int(np.argmax(dist))
        if not np.isfinite(dist[far]):
            continue  # nobody movable; leave the cluster empty
        assignments[far] = c
        centroids[c] = data[far]
        movable[far] = False


def _wcss(data: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> float:
    return float(((data - centroids[assignments]) ** 2).sum())


def _lloyd_single_run(data: np.ndarray, k: int, rng: np.random.Generator):
    """One seeded k-means run; returns (assignments, centroids, wcss_history,
    converged, iterations)."""
    n = data.shape[0]
    centroids = _kmeanspp_init(data, k, rng)
    assignments = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    converged = False
    it = 0
    eligible = np.ones(n, dtype=bool)
    while it < _MAX_LLOYD_ITER:
        it += 1
        new_assign = np.argmin(_dists_to_centroids(data, centroids), axis=1).astype(np.int64)
        _reseed_empty(data, new_assign, centroids, eligible)
        centroids = _update_centroids(data, new_assign, centroids)
        history.append(_wcss(data, new_assign, centroids))
        if np.array_equal(new_assign, assignments):
            converged = True
            break
        assignments = new_assign
    return assignments, centroids, history, converged, it


def kmeans(data: np.ndarray, k: int, restarts: int, seed: int) -> ClusteringResult:
    """Best of ``restarts`` seeded k-means++ runs by within-cluster sum of
    squares."""
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if not (n >= k >= 1):
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        assignments, _, history, converged, it = _lloyd_single_run(data, k, rng)
        score = history[-1]
        if best is None or score < best[0]:
            best = (score, assignments, converged, it)
    _, assignments, converged, it = best
    return ClusteringResult(assignments=assignments, k=k, converged=converged, iterations=it)


def spectral(data: np.ndarray, k: int, seed: int) -> ClusteringResult:
    """Gaussian-affinity spectral clustering.

    Kernel width is the median pairwise distance; the affinity is symmetrically
    degree-normalized, its top-k eigenvectors (cyclic Jacobi) are
    row-normalized, and k-means clusters the rows.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if not (n >= k >= 2):
        raise ValueError(f"need n >= k >= 2, got n={n}, k={k}")
    d2 = _pairwise_sq_dists(data)
    tri = d2[np.triu_indices(n, 1)]
    s = float(np.median(np.sqrt(tri))) if tri.size else 1.0
    if s <= 0.0:
        s = 1.0
    affinity = np.exp(-d2 / (2.0 * s * s))
    np.fill_diagonal(affinity, 0.0)
    degree = affinity.sum(axis=1)
    if np.any(degree <= 0.0):
        raise IsolatedPointError(
            f"instance {int(np.argmin(degree))} has zero affinity degree"
        )
    inv_sqrt = 1.0 / np.sqrt(degree)
    L = affinity * inv_sqrt[:, None] * inv_sqrt[None, :]
    w, vecs = _eigh_descending(L)
    U = vecs[:, :k]
    norms = np.sqrt((U**2).sum(axis=1))
    norms[norms == 0.0] = 1.0
    U = U / norms[:, None]
    inner = kmeans(U, k, restarts=10, seed=seed)
    return ClusteringResult(
        assignments=inner.assignments, k=k, converged=inner.converged, iterations=inner.iterations
    )


def _eigh_descending(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix via the selected Jacobi kernel,
    sorted by descending eigenvalue."""
    A = np.array(M, dtype=np.float64, order="C", copy=True)
    n = A.shape[0]
    V = np.eye(n, dtype=np.float64, order="C")
    kernels.jacobi_eigh(A, V, _JACOBI_TOL, _JACOBI_MAX_SWEEPS)
    w = np.diagonal(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def affinity_propagation(data: np.ndarray, cfg: ApConfig | None = None) -> ClusteringResult:
    """Deterministic responsibility/availability message passing on negative
    squared distances.

    Exemplars are the points whose self responsibility plus availability ends
    positive; every point joins its most similar exemplar. When no exemplar
    emerges (fully degenerate ties) the single best candidate, lowest index
    first, is used.
    """
    cfg = cfg or ApConfig()
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if n < 2:
        raise ValueError(f"affinity propagation needs at least 2 instances, got {n}")
    S = -_pairwise_sq_dists(data)
    off_diag = ~np.eye(n, dtype=bool)
    pref = float(np.median(S[off_diag])) if cfg.preference == "median" else float(cfg.preference)
    np.fill_diagonal(S, pref)
    S = np.ascontiguousarray(S)

    R = np.zeros((n, n))
    A = np.zeros((n, n))
    stable = 0
    prev = np.zeros(n, dtype=bool)
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        kernels.ap_iterate(S, R, A, cfg.damping)
        exemplars = (np.diagonal(R) + np.diagonal(A)) > 0.0
        # stability only counts once some exemplar has emerged
        if exemplars.any() and np.array_equal(exemplars, prev):
            stable += 1
            if stable >= cfg.convergence_window:
                converged = True
                break
        else:
            stable = 0
        prev = exemplars

    exemplar_idx = np.flatnonzero(prev)
    if exemplar_idx.size == 0:
        exemplar_idx = np.array([int(np.argmax(np.diagonal(R) + np.diagonal(A)))])
    labels = np.argmax(S[:, exemplar_idx], axis=1).astype(np.int64)
    labels[exemplar_idx] = np.arange(exemplar_idx.size)
    return ClusteringResult(
        assignments=labels, k=int(exemplar_idx.size), converged=converged, iterations=it
    )


def _constraint_adjacency(n: int, pairs: list[tuple[int, int]]):
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for i, j in pairs:
        neighbors[i].append(j)
        neighbors[j].append(i)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, ns in enumerate(neighbors):
        indptr[i + 1] = indptr[i] + len(ns)
    indices = np.fromiter(
        (j for ns in neighbors for j in ns), dtype=np.int64, count=int(indptr[-1])
    )
    return indptr, indices


def cop_kmeans(data: np.ndarray, k: int, constraints: ConstraintSet, seed: int) -> ClusteringResult:
    """K-means honoring must-link and cannot-link pairs.

    Instances are assigned in index order to the nearest cluster that violates
    no constraint against the assignments made so far in the pass; a dead end
    raises InfeasibleConstraintsError naming the stuck instance.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if not (n >= k >= 1):
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    if constraints.max_index() >= n:
        raise IndexError(f"constraint index {constraints.max_index()} out of range for n={n}")
    must_indptr, must_indices = _constraint_adjacency(n, constraints.must)
    cannot_indptr, cannot_indices = _constraint_adjacency(n, constraints.cannot)
    in_must = np.zeros(n, dtype=bool)
    for i, j in constraints.must:
        in_must[i] = in_must[j] = True

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(data, k, rng)
    assignments = np.full(n, -1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    converged = False
    it = 0
    while it < _MAX_LLOYD_ITER:
        it += 1
        order = np.argsort(_dists_to_centroids(data, centroids), axis=1, kind="stable")
        order = np.ascontiguousarray(order, dtype=np.int64)
        failed = kernels.constrained_assign(
            order, must_indptr, must_indices, cannot_indptr, cannot_indices, out
        )
        if failed >= 0:
            raise InfeasibleConstraintsError(failed)
        new_assign = out.copy()
        _reseed_empty(data, new_assign, centroids, eligible=~in_must)
        centroids = _update_centroids(data, new_assign, centroids)
        if np.array_equal(new_assign, assignments):
            converged = True
            break
        assignments = new_assign
    assignments, k_eff = _compact_ids(assignments)
    return ClusteringResult(assignments=assignments, k=k_eff, converged=converged, iterations=it)


def _compact_ids(assignments: np.ndarray) -> tuple[np.ndarray, int]:
    present = np.unique(assignments)
    remap = {int(c): i for i, c in enumerate(present)}
    return np.array([remap[int(c)] for c in assignments], dtype=np.int64), len(present)


def count_violations(assignments: np.ndarray, constraints: ConstraintSet) -> tuple[int, int]:
    """(split must pairs, joined cannot pairs) under an assignment."""
    assignments = np.asarray(assignments)
    must_bad = sum(1 for i, j in constraints.must if assignments[i] != assignments[j])
    cannot_bad = sum(1 for i, j in constraints.cannot if assignments[i] == assignments[j])
    return must_bad, cannot_bad
