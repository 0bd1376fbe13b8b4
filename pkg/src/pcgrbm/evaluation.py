"""Clustering metrics (mapped accuracy, purity) and the Friedman Aligned
Ranks test with chi-square p-values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaincc
from scipy.stats import rankdata

from .clustering import ClusteringResult


class DegenerateRanksError(ValueError):
    """Raised when the rank statistic's denominator vanishes (total tie)."""


def _confusion(true_labels: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    n_true = int(true_labels.max()) + 1
    n_pred = int(predicted.max()) + 1
    counts = np.zeros((n_true, n_pred), dtype=np.int64)
    np.add.at(counts, (true_labels, predicted), 1)
    return counts


def accuracy(true_labels, result: ClusteringResult) -> float:
    """Fraction of instances matched under the best one-to-one mapping of
    cluster ids to class labels (rectangular confusion matrices are
    zero-padded square before the assignment)."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted = result.assignments
    if true_labels.shape != predicted.shape:
        raise ValueError(
            f"label/assignment length mismatch: {true_labels.shape} vs {predicted.shape}"
        )
    counts = _confusion(true_labels, predicted)
    size = max(counts.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(-padded)
    matched = padded[rows, cols].sum()
    return float(matched) / true_labels.size


def purity(true_labels, result: ClusteringResult) -> float:
    """Weighted dominant-class fraction over clusters."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted = result.assignments
    if true_labels.shape != predicted.shape:
        raise ValueError(
            f"label/assignment length mismatch: {true_labels.shape} vs {predicted.shape}"
        )
    counts = _confusion(true_labels, predicted)
    return float(counts.max(axis=0).sum()) / true_labels.size


@dataclass(frozen=True)
class ScoreMatrix:
    """Datasets x algorithms score table feeding the rank test."""

    scores: np.ndarray
    row_names: list[str]
    col_names: list[str]

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ValueError("scores must be 2-D")
        d, g = scores.shape
        if d < 2 or g < 2:
            raise ValueError(f"need at least 2 rows and 2 columns, got {d}x{g}")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores contain non-finite values")
        if len(self.row_names) != d or len(self.col_names) != g:
            raise ValueError("row/column name lengths must match the matrix")
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class RankTable:
    """Joint tie-averaged ranks of the row-aligned scores, with marginals."""

    ranks: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    row_names: list[str] | None = None
    col_names: list[str] | None = None

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.float64)
        d, g = ranks.shape
        total = ranks.sum()
        expected = g * d * (g * d + 1) / 2.0
        if abs(total - expected) > 1e-6 * max(1.0, expected):
            raise ValueError(
                f"ranks must be a tie-averaged ranking of all {g * d} cells "
                f"(sum {total}, expected {expected})"
            )
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "row_sums", np.asarray(self.row_sums, dtype=np.float64))
        object.__setattr__(self, "col_sums", np.asarray(self.col_sums, dtype=np.float64))


def rank_table_from_ranks(ranks, row_names=None, col_names=None) -> RankTable:
    """Wrap an externally produced joint rank matrix (validated)."""
    ranks = np.asarray(ranks, dtype=np.float64)
    return RankTable(
        ranks=ranks,
        row_sums=ranks.sum(axis=1),
        col_sums=ranks.sum(axis=0),
        row_names=row_names,
        col_names=col_names,
    )


def aligned_ranks(m: ScoreMatrix, higher_is_better: bool = True) -> RankTable:
    """Subtract each row's mean, then rank all cells jointly (rank 1 = best;
    ties get average ranks)."""
    aligned = m.scores - m.scores.mean(axis=1, keepdims=True)
    flat = -aligned.ravel() if higher_is_better else aligned.ravel()
    ranks = rankdata(flat, method="average").reshape(m.scores.shape)
    return rank_table_from_ranks(ranks, row_names=m.row_names, col_names=m.col_names)


def friedman_aligned_statistic(r: RankTable) -> float:
    """The aligned-ranks chi-square statistic over D datasets and G
    algorithms:

    T = (G-1) [ sum_j C_j^2 - (G D^2 / 4)(G D + 1)^2 ]
        / ( G D (G D + 1)(2 G D + 1) / 6 - (1/G) sum_i R_i^2 )

    with C_j the column rank sums and R_i the row rank sums.
    """
    d, g = r.ranks.shape
    gd = g * d
    numerator = (g - 1) * (float((r.col_sums**2).sum()) - (g * d * d / 4.0) * (gd + 1) ** 2)
    denominator = gd * (gd + 1) * (2 * gd + 1) / 6.0 - float((r.row_sums**2).sum()) / g
    if abs(denominator) < 1e-12 * max(1.0, gd**3):
        raise DegenerateRanksError("rank table is a total tie; statistic undefined")
    return numerator / denominator


def chi_square_sf(t: float, df: int) -> float:
    """Upper-tail chi-square probability via the regularized incomplete gamma
    function."""
    if df < 1:
        raise ValueError(f"df must be at least 1, got {df}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return float(gammaincc(df / 2.0, t / 2.0))


def friedman_aligned_test(m_or_ranks, higher_is_better: bool = True) -> dict:
    """Full test: returns {"T", "df", "p_one_tailed", "p_two_tailed"} plus the
    rank table under "ranks". Accepts a ScoreMatrix (which gets aligned and
    ranked) or a ready RankTable."""
    table = m_or_ranks if isinstance(m_or_ranks, RankTable) else aligned_ranks(m_or_ranks, higher_is_better)
    t = friedman_aligned_statistic(table)
    df = table.ranks.shape[1] - 1
    p_one = chi_square_sf(t, df)
    return {
        "T": t,
        "df": df,
        "p_one_tailed": p_one,
        "p_two_tailed": min(1.0, 2.0 * p_one),
        "ranks": table,
    }
