"""Pairwise-constraint-guided GRBM training.

The guidance acts on reconstructed visibles: must-link pairs are pulled
together and cannot-link pairs pushed apart through penalties on
(h_s - h_t) W^T, folded into the CD-1 weight update. Two update conventions
are provided: ``paper_exact`` adds the raw penalty-gradient difference with a
plus sign and no learning rate on that term, ``descent`` subtracts it scaled
by ``constraint_rate`` (the strict gradient-descent direction).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import ConstraintSet, Dataset
from .grbm import (
    CdStats,
    GrbmParams,
    TrainConfig,
    _cd1_pass,
    extract_features,
    hidden_prob,
    init_params,
    reconstruct_visible,
    _epoch_batches,
)

SIGN_MODES = ("paper_exact", "descent")


@dataclass(frozen=True)
class PcgrbmConfig:
    """Guided-training settings on top of a base TrainConfig.

    lambda_ in (0, 1) balances the CD term against the constraint term;
    constraint_rate only applies in descent mode; use_sampled_hidden picks
    whether sampled binary hiddens or their probabilities enter the pair
    penalties.
    """

    base: TrainConfig
    lambda_: float = 0.7
    sign_mode: str = "paper_exact"
    constraint_rate: float = 0.1
    use_sampled_hidden: bool = True

    def __post_init__(self):
        if not 0.0 < self.lambda_ < 1.0:
            raise ValueError(f"lambda must lie strictly in (0, 1), got {self.lambda_}")
        if self.sign_mode not in SIGN_MODES:
            raise ValueError(f"sign_mode must be one of {SIGN_MODES}, got {self.sign_mode!r}")
        if self.constraint_rate <= 0:
            raise ValueError(f"constraint_rate must be positive, got {self.constraint_rate}")


@dataclass(frozen=True)
class HiddenPairBatch:
    """Hidden representations of constrained pairs, stacked per side.

    must_s[i] and must_t[i] are the two length-q hidden vectors of the i-th
    must pair (entries in [0, 1]); likewise for cannot pairs.
    """

    must_s: np.ndarray
    must_t: np.ndarray
    cannot_s: np.ndarray
    cannot_t: np.ndarray

    def __post_init__(self):
        for name in ("must_s", "must_t", "cannot_s", "cannot_t"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D (pairs x q), got shape {arr.shape}")
            if arr.size and (arr.min() < 0 or arr.max() > 1):
                raise ValueError(f"{name} entries must lie in [0, 1]")
            object.__setattr__(self, name, arr)
        if self.must_s.shape != self.must_t.shape or self.cannot_s.shape != self.cannot_t.shape:
            raise ValueError("pair sides must have matching shapes")

    @property
    def n_must(self) -> int:
        return self.must_s.shape[0]

    @property
    def n_cannot(self) -> int:
        return self.cannot_s.shape[0]

    @classmethod
    def empty(cls, q: int) -> "HiddenPairBatch":
        z = np.zeros((0, q))
        return cls(z, z.copy(), z.copy(), z.copy())

    @classmethod
    def from_hidden(cls, hidden: np.ndarray, constraints: ConstraintSet) -> "HiddenPairBatch":
        """Look up each constraint pair's rows in an n x q hidden matrix."""
        hidden = np.asarray(hidden, dtype=np.float64)
        n, q = hidden.shape
        if constraints.max_index() >= n:
            raise IndexError(
                f"constraint index {constraints.max_index()} out of range for {n} hidden rows"
            )

        def stack(pairs, side):
            if not pairs:
                return np.zeros((0, q))
            idx = np.array([p[side] for p in pairs], dtype=np.int64)
            return hidden[idx]

        return cls(
            must_s=stack(constraints.must, 0),
            must_t=stack(constraints.must, 1),
            cannot_s=stack(constraints.cannot, 0),
            cannot_t=stack(constraints.cannot, 1),
        )


def _side_penalty(W: np.ndarray, hs: np.ndarray, ht: np.ndarray) -> float:
    if hs.shape[0] == 0:
        return 0.0
    diff = (hs - ht) @ W.T
    return float((diff**2).sum() / hs.shape[0])


def pairwise_penalty(params: GrbmParams, batch: HiddenPairBatch) -> tuple[float, float]:
    """Mean squared reconstructed-pair distances: (must side, cannot side).

    Each side is (1/N) sum ||(h_s - h_t) W^T||^2; an empty side contributes 0.
    """
    _check_q(params, batch)
    return (
        _side_penalty(params.W, batch.must_s, batch.must_t),
        _side_penalty(params.W, batch.cannot_s, batch.cannot_t),
    )


def _side_gradient(W: np.ndarray, hs: np.ndarray, ht: np.ndarray) -> np.ndarray:
    if hs.shape[0] == 0:
        return np.zeros_like(W)
    D = hs - ht  # N x q
    return 2.0 / hs.shape[0] * (W @ D.T) @ D


def constraint_gradient(params: GrbmParams, batch: HiddenPairBatch) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the two pair penalties with respect to W.

    Uses the closed matrix form (2/N) sum (W d^T) d with d = h_s - h_t; an
    empty side yields a zero matrix.
    """
    _check_q(params, batch)
    return (
        _side_gradient(params.W, batch.must_s, batch.must_t),
        _side_gradient(params.W, batch.cannot_s, batch.cannot_t),
    )


def _constraint_gradient_elementwise(params: GrbmParams, batch: HiddenPairBatch):
    """Entry-by-entry evaluation of the two derivative terms; slow reference
    path kept for cross-checking the matrix form."""
    p, q = params.W.shape

    def side(hs, ht):
        F = np.zeros((p, q))
        if hs.shape[0] == 0:
            return F
        for s_row, t_row in zip(hs, ht):
            d = s_row - t_row
            dWt = d @ params.W.T  # 1 x p
            Wd = params.W @ d  # p
            for i in range(p):
                for j in range(q):
                    F[i, j] += dWt[i] * d[j] + d[j] * Wd[i]
        return F / hs.shape[0]

    return side(batch.must_s, batch.must_t), side(batch.cannot_s, batch.cannot_t)


def _check_q(params: GrbmParams, batch: HiddenPairBatch) -> None:
    for name in ("must_s", "cannot_s"):
        arr = getattr(batch, name)
        if arr.shape[0] and arr.shape[1] != params.q:
            raise ValueError(f"{name} width {arr.shape[1]} does not match q={params.q}")


def combined_update(
    params: GrbmParams,
    stats: CdStats,
    F_M: np.ndarray,
    F_C: np.ndarray,
    cfg: PcgrbmConfig,
) -> GrbmParams:
    """One guided weight update; biases always follow the plain CD rule.

    paper_exact: W += lambda eps (pos - neg) + (1 - lambda)(F_M - F_C)
    descent:     W += lambda eps (pos - neg) - (1 - lambda) rate (F_M - F_C)
    """
    lam = cfg.lambda_
    eps = cfg.base.epsilon
    cd_term = lam * (eps * (stats.pos_assoc - stats.neg_assoc))
    penalty = F_M - F_C
    if cfg.sign_mode == "paper_exact":
        W = params.W + cd_term + (1.0 - lam) * penalty
    else:
        W = params.W + cd_term - (1.0 - lam) * cfg.constraint_rate * penalty
    return replace(
        params,
        W=W,
        a=params.a + eps * (stats.pos_v - stats.neg_v),
        b=params.b + eps * (stats.pos_h - stats.neg_h),
    )


def train_pcgrbm(
    d: Dataset,
    constraints: ConstraintSet,
    cfg: PcgrbmConfig,
    q: int,
    epoch_hook=None,
) -> GrbmParams:
    """Guided CD-1 training on a normalized dataset.

    Per epoch: hidden pass (probabilities, then Bernoulli samples), noise-free
    reconstruction, pair lookup at the constraint indices, penalty gradients,
    combined update. Constraint indices address dataset rows. Under
    mini-batching a pair joins the first batch of the epoch at which both of
    its endpoints have fresh hidden states; by the last batch of the epoch all
    remaining pairs have been folded in.
    """
    if not d.normalized:
        raise ValueError("train_pcgrbm requires a normalized dataset")
    if constraints.max_index() >= d.n:
        raise IndexError(
            f"constraint index {constraints.max_index()} out of range for n={d.n}"
        )
    rng = np.random.default_rng(cfg.base.seed)
    params = init_params(d.p, q, rng)
    all_pairs = [(i, j, True) for (i, j) in constraints.must] + [
        (i, j, False) for (i, j) in constraints.cannot
    ]
    for epoch in range(cfg.base.epochs):
        hidden_cache = np.zeros((d.n, q))
        seen = np.zeros(d.n, dtype=bool)
        processed = np.zeros(len(all_pairs), dtype=bool)
        for idx in _epoch_batches(d.n, cfg.base, rng):
            stats, h0_probs, h0_samples, _, _ = _cd1_pass(params, d.features[idx], rng)
            hidden_cache[idx] = h0_samples if cfg.use_sampled_hidden else h0_probs
            seen[idx] = True
            must_rows, cannot_rows = [], []
            for pair_id, (i, j, is_must) in enumerate(all_pairs):
                if processed[pair_id] or not (seen[i] and seen[j]):
                    continue
                processed[pair_id] = True
                (must_rows if is_must else cannot_rows).append((i, j))
            batch_pairs = _pair_batch_from_cache(hidden_cache, must_rows, cannot_rows, q)
            F_M, F_C = constraint_gradient(params, batch_pairs)
            params = combined_update(params, stats, F_M, F_C, cfg)
        if epoch_hook is not None:
            epoch_hook(epoch, params)
    return params


def _pair_batch_from_cache(hidden, must_rows, cannot_rows, q) -> HiddenPairBatch:
    def stack(rows, side):
        if not rows:
            return np.zeros((0, q))
        return hidden[np.array([r[side] for r in rows], dtype=np.int64)]

    return HiddenPairBatch(
        must_s=stack(must_rows, 0),
        must_t=stack(must_rows, 1),
        cannot_s=stack(cannot_rows, 0),
        cannot_t=stack(cannot_rows, 1),
    )


def penalty_trace(
    params: GrbmParams, d: Dataset, constraints: ConstraintSet
) -> tuple[float, float, float]:
    """(must penalty, cannot penalty, reconstruction MSE) at the current
    parameters, all computed from hidden probabilities; rng-free."""
    hidden = extract_features(params, d)
    batch = HiddenPairBatch.from_hidden(hidden, constraints)
    j_must, j_cannot = pairwise_penalty(params, batch)
    recon = reconstruct_visible(params, hidden)
    recon_mse = float(np.mean((d.features - recon) ** 2))
    return j_must, j_cannot, recon_mse


def mean_pair_distance(params: GrbmParams, d: Dataset, pairs: list[tuple[int, int]]) -> float:
    """Mean reconstructed-visible distance ||v_s - v_t|| over index pairs,
    through hidden probabilities; the visible bias cancels."""
    if not pairs:
        return 0.0
    hidden = hidden_prob(params, d.features)
    s_idx = np.array([p[0] for p in pairs], dtype=np.int64)
    t_idx = np.array([p[1] for p in pairs], dtype=np.int64)
    diff = (hidden[s_idx] - hidden[t_idx]) @ params.W.T
    return float(np.sqrt((diff**2).sum(axis=1)).mean())
