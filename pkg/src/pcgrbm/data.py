"""Dataset ingestion, normalization, fold splitting, synthetic blobs, and
pairwise-constraint sampling from labels."""

from __future__ import annotations

import csv
import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np

Pair = tuple[int, int]


@dataclass(frozen=True)
class Dataset:
    """An n x p feature matrix with optional integer class labels.

    ``normalized`` records whether columns have been z-scored already; most
    model entry points require it.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray | None = None
    normalized: bool = False

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError(f"features must be a non-empty 2-D matrix, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        object.__setattr__(self, "features", feats)
        if self.labels is not None:
            labs = np.asarray(self.labels, dtype=np.int64)
            if labs.shape != (feats.shape[0],):
                raise ValueError("labels length must equal the number of rows")
            if labs.min(initial=0) < 0:
                raise ValueError("labels must be non-negative")
            object.__setattr__(self, "labels", labs)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class FoldSplit:
    """One train/test split of row indices."""

    train_indices: np.ndarray
    test_indices: np.ndarray


@dataclass(frozen=True)
class ConstraintSet:
    """Unordered index pairs: must-link (same class) and cannot-link (different class)."""

    must: list[Pair] = field(default_factory=list)
    cannot: list[Pair] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "must", [_canonical_pair(p) for p in self.must])
        object.__setattr__(self, "cannot", [_canonical_pair(p) for p in self.cannot])
        overlap = set(self.must) & set(self.cannot)
        if overlap:
            raise ValueError(f"pairs present in both must and cannot: {sorted(overlap)[:3]}")

    @property
    def n_must(self) -> int:
        return len(self.must)

    @property
    def n_cannot(self) -> int:
        return len(self.cannot)

    def max_index(self) -> int:
        """Largest index referenced, or -1 when empty."""
        pairs = self.must + self.cannot
        return max((max(p) for p in pairs), default=-1)


def _canonical_pair(pair) -> Pair:
    i, j = int(pair[0]), int(pair[1])
    if i == j:
        raise ValueError(f"self-pair ({i},{i}) is not a valid constraint")
    if i < 0 or j < 0:
        raise ValueError(f"negative index in pair ({i},{j})")
    return (i, j) if i < j else (j, i)


def load_csv(path: str, label_column: str | None = None) -> Dataset:
    """Load a comma-separated file (header row, UTF-8) into a Dataset.

    When ``label_column`` names a header cell, that column is removed from the
    features and its distinct values are mapped to 0..K-1 in first-appearance
    order. Every remaining cell must parse as a finite float.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(header)
    for lineno, row in enumerate(rows, start=2):
        if len(row) != width:
            raise ValueError(f"{path}: line {lineno} has {len(row)} cells, expected {width}")

    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)

    labels = None
    if label_idx is not None:
        seen: dict[str, int] = {}
        labels = np.array([seen.setdefault(row[label_idx], len(seen)) for row in rows], dtype=np.int64)

    feature_cols = [j for j in range(width) if j != label_idx]
    features = np.empty((len(rows), len(feature_cols)), dtype=np.float64)
    for i, row in enumerate(rows):
        for out_j, j in enumerate(feature_cols):
            try:
                value = float(row[j])
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric cell {row[j]!r} in column {header[j]!r}, line {i + 2}"
                ) from None
            if not math.isfinite(value):
                raise ValueError(f"{path}: non-finite cell in column {header[j]!r}, line {i + 2}")
            features[i, out_j] = value

    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(name=name, features=features, labels=labels, normalized=False)


def normalize(d: Dataset) -> Dataset:
    """Z-score each column (population std, divide by n); constant columns
    become all zeros. Labels pass through untouched."""
    if d.normalized:
        raise ValueError("dataset is already normalized")
    mean = d.features.mean(axis=0)
    std = d.features.std(axis=0)  # population convention: in-sample std is exactly 1
    centered = d.features - mean
    scaled = np.divide(centered, std, out=np.zeros_like(centered), where=std > 0)
    return Dataset(name=d.name, features=scaled, labels=d.labels, normalized=True)


def kfold(n: int, k: int, seed: int) -> list[FoldSplit]:
    """Shuffle 0..n-1 and cut into k folds whose test sizes differ by at most 1."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of instances n={n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    base, extra = divmod(n, k)
    splits = []
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        test = np.sort(order[start : start + size])
        train = np.sort(np.concatenate([order[:start], order[start + size :]]))
        splits.append(FoldSplit(train_indices=train, test_indices=test))
        start += size
    return splits


def _selection_order(labels: np.ndarray, seed: int) -> dict[int, np.ndarray]:
    """Per class, a fixed shuffled order of its member indices.

    Prefixes of these orders give nested selections across growing fractions.
    """
    rng = np.random.default_rng(seed)
    order = {}
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        order[int(cls)] = rng.permutation(members)
    return order


def _pairs_from_selection(selected: dict[int, np.ndarray]) -> ConstraintSet:
    must: list[Pair] = []
    cannot: list[Pair] = []
    classes = sorted(selected)
    for cls in classes:
        picked = sorted(int(i) for i in selected[cls])
        must.extend(itertools.combinations(picked, 2))
    for ca, cb in itertools.combinations(classes, 2):
        for i in sorted(int(x) for x in selected[ca]):
            for j in sorted(int(x) for x in selected[cb]):
                cannot.append((i, j) if i < j else (j, i))
    return ConstraintSet(must=must, cannot=cannot)


def sample_constraints(labels, fraction: float, seed: int) -> ConstraintSet:
    """Pick ceil(fraction * class size) instances per class; all within-class
    pairs of the picks become must-links, all cross-class pairs cannot-links."""
    return sample_constraints_incremental(labels, [fraction], seed)[0]


def sample_constraints_incremental(labels, fractions, seed: int) -> list[ConstraintSet]:
    """Nested constraint sets for strictly ascending fractions.

    The instances selected at fraction f[i] are a prefix of those selected at
    f[i+1], so each returned set's pairs are a subset of the next set's.
    """
    if labels is None:
        raise ValueError("labels are required to sample constraints")
    labels = np.asarray(labels, dtype=np.int64)
    fractions = [float(f) for f in fractions]
    if not fractions:
        raise ValueError("at least one fraction is required")
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {f}")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError(f"fractions must be strictly ascending, got {fractions}")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("constraint sampling needs at least 2 classes")

    order = _selection_order(labels, seed)
    out = []
    for f in fractions:
        selected = {cls: members[: math.ceil(f * len(members))] for cls, members in order.items()}
        contributing = sum(1 for picks in selected.values() if len(picks) > 0)
        if contributing < 2:
            raise ValueError(f"fraction {f} selects instances from fewer than 2 classes")
        out.append(_pairs_from_selection(selected))
    return out


def transitive_closure(cs: ConstraintSet) -> ConstraintSet:
    """Close must-links transitively and propagate cannot-links across the
    merged groups. Optional everywhere; raw pairs are consumed by default."""
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    nodes: set[int] = set()
    for i, j in cs.must + cs.cannot:
        nodes.update((i, j))
    for i, j in cs.must:
        union(i, j)
    groups: dict[int, list[int]] = {}
    for x in sorted(nodes):
        groups.setdefault(find(x), []).append(x)

    must: set[Pair] = set()
    for members in groups.values():
        must.update(itertools.combinations(members, 2))
    cannot: set[Pair] = set()
    for i, j in cs.cannot:
        gi, gj = groups[find(i)], groups[find(j)]
        if find(i) == find(j):
            raise ValueError(f"contradictory constraints: ({i},{j}) is both must and cannot after closure")
        for a in gi:
            for b in gj:
                cannot.add((a, b) if a < b else (b, a))
    return ConstraintSet(must=sorted(must), cannot=sorted(cannot))


def synth_blobs(n: int, k: int, p: int, separation: float, seed: int) -> Dataset:
    """Near-equal isotropic Gaussian clusters with centers at mutual distance
    >= separation; labels are the cluster ids."""
    if not (n >= k >= 1):
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    if p < 1:
        raise ValueError(f"need p >= 1, got p={p}")
    if separation <= 0:
        raise ValueError(f"separation must be positive, got {separation}")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, p))
    if k > 1:
        diffs = centers[:, None, :] - centers[None, :, :]
        dists = np.sqrt((diffs**2).sum(axis=2))
        closest = dists[np.triu_indices(k, 1)].min()
        if closest <= 0:
            # coincident random centers: jitter deterministically, then rescale
            centers = centers + rng.standard_normal((k, p)) * 1e-6
            diffs = centers[:, None, :] - centers[None, :, :]
            closest = np.sqrt((diffs**2).sum(axis=2))[np.triu_indices(k, 1)].min()
        # closest pair lands exactly at `separation`, so the knob controls
        # cluster overlap in both directions
        centers = centers * (separation / closest)

    base, extra = divmod(n, k)
    sizes = [base + (1 if c < extra else 0) for c in range(k)]
    labels = np.repeat(np.arange(k, dtype=np.int64), sizes)
    features = centers[labels] + rng.standard_normal((n, p))
    return Dataset(name=f"blobs{k}x{p}", features=features, labels=labels, normalized=False)
