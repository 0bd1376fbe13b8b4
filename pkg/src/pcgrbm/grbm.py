"""Gaussian-visible, binary-hidden RBM: energy, conditionals, sampling,
noise-free reconstruction, and CD-1 training.

Conventions: W is p x q (visible x hidden), the hidden activation uses the
scaled input v_i / sigma_i, and the reconstruction is the noise-free
conditional mean a + h W^T. With z-scored data sigma is fixed at 1 and not
learned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class GrbmParams:
    """Model parameters: weights W (p x q), visible biases a (p), hidden
    biases b (q), and per-visible noise scales sigma (p, all positive)."""

    W: np.ndarray
    a: np.ndarray
    b: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise ValueError(f"W must be a p x q matrix with p, q >= 1, got shape {W.shape}")
        p, q = W.shape
        if a.shape != (p,):
            raise ValueError(f"a must have shape ({p},), got {a.shape}")
        if b.shape != (q,):
            raise ValueError(f"b must have shape ({q},), got {b.shape}")
        if sigma.shape != (p,):
            raise ValueError(f"sigma must have shape ({p},), got {sigma.shape}")
        for name, arr in (("W", W), ("a", a), ("b", b), ("sigma", sigma)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(sigma <= 0):
            raise ValueError("sigma entries must be positive")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma", sigma)

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class CdStats:
    """Batch-averaged data and reconstruction statistics from one CD-1 pass."""

    pos_assoc: np.ndarray  # p x q, <v h> under the data
    neg_assoc: np.ndarray  # p x q, <v h> under the reconstruction
    pos_v: np.ndarray
    neg_v: np.ndarray
    pos_h: np.ndarray
    neg_h: np.ndarray
    batch_size: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        for name in ("pos_assoc", "neg_assoc", "pos_v", "neg_v", "pos_h", "neg_h"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class TrainConfig:
    """Learning rate, epoch count, batch policy, and rng seed.

    batch_size is "full" (whole-set updates, the default) or a positive int.
    """

    epsilon: float
    epochs: int
    batch_size: int | str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size != "full" and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ValueError(f"batch_size must be 'full' or a positive int, got {self.batch_size!r}")


def _as_matrix(v: np.ndarray, width: int, what: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(v, dtype=np.float64)
    was_vector = arr.ndim == 1
    if was_vector:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{what} has shape {np.shape(v)}, expected width {width}")
    return arr, was_vector


def energy(params: GrbmParams, v: np.ndarray, h: np.ndarray) -> float:
    """Joint energy of a visible vector and a binary hidden vector:
    sum_i (v_i - a_i)^2 / (2 sigma_i^2) - sum_j b_j h_j
    - sum_ij (v_i / sigma_i) h_j w_ij.
    """
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.shape != (params.p,):
        raise ValueError(f"v has shape {v.shape}, expected ({params.p},)")
    if h.shape != (params.q,):
        raise ValueError(f"h has shape {h.shape}, expected ({params.q},)")
    if not np.all((h == 0) | (h == 1)):
        raise ValueError("h entries must be 0 or 1")
    quad = float(np.sum((v - params.a) ** 2 / (2.0 * params.sigma**2)))
    hidden = float(params.b @ h)
    cross = float((v / params.sigma) @ params.W @ h)
    return quad - hidden - cross


def hidden_prob(params: GrbmParams, v: np.ndarray) -> np.ndarray:
    """p(h_j = 1 | v) = logistic(b_j + sum_i (v_i / sigma_i) w_ij).

    Accepts a single visible vector or a stack of rows; the output matches.
    """
    V, was_vector = _as_matrix(v, params.p, "v")
    act = params.b + (V / params.sigma) @ params.W
    out = _logistic(act)
    return out[0] if was_vector else out


def _logistic(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sample_hidden(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draws, returned as a 0/1 float array."""
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return (rng.random(probs.shape) < probs).astype(np.float64)


def reconstruct_visible(params: GrbmParams, h: np.ndarray) -> np.ndarray:
    """Noise-free reconstruction a + h W^T; h may be binary or probabilities,
    a vector or a stack of rows."""
    H, was_vector = _as_matrix(h, params.q, "h")
    out = params.a + H @ params.W.T
    return out[0] if was_vector else out


def _cd1_pass(params: GrbmParams, batch: np.ndarray, rng: np.random.Generator):
    """One Gibbs half-chain over a batch.

    Returns (stats, h0_probs, h0_samples, v1, h1_probs). Associations use
    hidden probabilities on both ends; the sampled h0 only drives v1.
    """
    n = batch.shape[0]
    h0_probs = hidden_prob(params, batch)
    h0_samples = sample_hidden(h0_probs, rng)
    v1 = reconstruct_visible(params, h0_samples)
    h1_probs = hidden_prob(params, v1)
    stats = CdStats(
        pos_assoc=batch.T @ h0_probs / n,
        neg_assoc=v1.T @ h1_probs / n,
        pos_v=batch.mean(axis=0),
        neg_v=v1.mean(axis=0),
        pos_h=h0_probs.mean(axis=0),
        neg_h=h1_probs.mean(axis=0),
        batch_size=n,
    )
    return stats, h0_probs, h0_samples, v1, h1_probs


def cd1_step(params: GrbmParams, batch: np.ndarray, rng: np.random.Generator) -> CdStats:
    """Collect CD-1 statistics for one batch of visible rows."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] < 1:
        raise ValueError("batch must be a non-empty 2-D matrix")
    if batch.shape[1] != params.p:
        raise ValueError(f"batch width {batch.shape[1]} does not match p={params.p}")
    stats, *_ = _cd1_pass(params, batch, rng)
    return stats


def apply_cd_update(params: GrbmParams, stats: CdStats, epsilon: float) -> GrbmParams:
    """W += eps (pos - neg) associations, biases likewise; sigma untouched."""
    return replace(
        params,
        W=params.W + epsilon * (stats.pos_assoc - stats.neg_assoc),
        a=params.a + epsilon * (stats.pos_v - stats.neg_v),
        b=params.b + epsilon * (stats.pos_h - stats.neg_h),
    )


def init_params(p: int, q: int, rng: np.random.Generator) -> GrbmParams:
    """Small Gaussian weights (std 0.01), zero biases, unit noise scales."""
    return GrbmParams(
        W=rng.normal(0.0, 0.01, size=(p, q)),
        a=np.zeros(p),
        b=np.zeros(q),
        sigma=np.ones(p),
    )


def _epoch_batches(n: int, cfg: TrainConfig, rng: np.random.Generator):
    if cfg.batch_size == "full":
        yield np.arange(n)
        return
    order = rng.permutation(n)
    for start in range(0, n, cfg.batch_size):
        yield order[start : start + cfg.batch_size]


def train_grbm(d: Dataset, cfg: TrainConfig, q: int, epoch_hook=None) -> GrbmParams:
    """CD-1 training on a normalized dataset.

    ``epoch_hook(epoch, params)``, when given, is called after each epoch's
    updates; handy for tracing reconstruction error.
    """
    if not d.normalized:
        raise ValueError("train_grbm requires a normalized dataset")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(d.p, q, rng)
    for epoch in range(cfg.epochs):
        for idx in _epoch_batches(d.n, cfg, rng):
            stats = cd1_step(params, d.features[idx], rng)
            params = apply_cd_update(params, stats, cfg.epsilon)
        if epoch_hook is not None:
            epoch_hook(epoch, params)
    return params


def extract_features(params: GrbmParams, d: Dataset) -> np.ndarray:
    """Hidden probabilities for every row; deterministic, no sampling."""
    if not d.normalized:
        raise ValueError("extract_features requires a normalized dataset")
    if d.p != params.p:
        raise ValueError(f"dataset width {d.p} does not match model p={params.p}")
    return hidden_prob(params, d.features)


def reconstruction_mse(params: GrbmParams, features: np.ndarray) -> float:
    """Mean squared error of the noise-free reconstruction through hidden
    probabilities; the tractable training diagnostic."""
    probs = hidden_prob(params, features)
    recon = reconstruct_visible(params, probs)
    return float(np.mean((features - recon) ** 2))
