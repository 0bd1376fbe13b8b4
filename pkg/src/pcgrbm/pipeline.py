"""End-to-end experiment protocol: normalize, split folds, sample nested
constraint sets from training folds, train baseline and guided models,
extract test-fold features, cluster with every configured algorithm, score,
aggregate, and emit reports.

Everything is a pure function of (config, seeds): per-task rng streams are
derived from (seed, dataset, fold, stage) ids, so results are identical
regardless of thread schedule.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import clustering as cl
from .data import ConstraintSet, Dataset, kfold, load_csv, normalize, sample_constraints, sample_constraints_incremental, synth_blobs
from .evaluation import ScoreMatrix, accuracy, friedman_aligned_test, purity
from .grbm import TrainConfig, extract_features, train_grbm
from .guided import PcgrbmConfig, train_pcgrbm
from .model_io import constraint_fingerprint

FEATURE_SOURCES = ("raw", "grbm", "pcgrbm")
METRICS = ("accuracy", "purity")
KMEANS_RESTARTS = 10

# seed-stream tags so every stage draws from its own deterministic stream
_TAG_FOLDS, _TAG_CONSTRAINTS, _TAG_GRBM, _TAG_PCGRBM, _TAG_TEST_CONSTRAINTS, _TAG_CLUSTER = range(6)


def derive_seed(*parts: int) -> int:
    """Stable child seed from non-negative integer components."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint32)[0])


def _adapter_kmeans(features, k, constraints, seed):
    return cl.kmeans(features, k, restarts=KMEANS_RESTARTS, seed=seed)


def _adapter_spectral(features, k, constraints, seed):
    return cl.spectral(features, k, seed=seed)


def _adapter_ap(features, k, constraints, seed):
    return cl.affinity_propagation(features)


def _adapter_cop_kmeans(features, k, constraints, seed):
    return cl.cop_kmeans(features, k, constraints or ConstraintSet(), seed=seed)


# Adapter signature: fn(features, k, constraints_or_none, seed) -> ClusteringResult.
# Third-party semi-supervised algorithms plug in through register_algorithm.
CLUSTERING_ADAPTERS = {
    "kmeans": _adapter_kmeans,
    "spectral": _adapter_spectral,
    "ap": _adapter_ap,
    "cop_kmeans": _adapter_cop_kmeans,
}

_CONSTRAINT_CONSUMERS = {"cop_kmeans"}


def register_algorithm(name: str, fn, consumes_constraints: bool = True) -> None:
    """Expose an external clustering algorithm to experiment configs."""
    CLUSTERING_ADAPTERS[name] = fn
    if consumes_constraints:
        _CONSTRAINT_CONSUMERS.add(name)


@dataclass(frozen=True)
class DatasetSpec:
    """Either a CSV source (path + label column) or synthetic blob params."""

    name: str
    csv: str | None = None
    label_column: str | None = None
    synth: dict | None = None

    def load(self) -> Dataset:
        if (self.csv is None) == (self.synth is None):
            raise ValueError(f"dataset {self.name!r} must give exactly one of csv or synth")
        if self.csv is not None:
            ds = load_csv(self.csv, label_column=self.label_column)
        else:
            ds = synth_blobs(
                n=int(self.synth["n"]),
                k=int(self.synth["k"]),
                p=int(self.synth["p"]),
                separation=float(self.synth["separation"]),
                seed=int(self.synth["seed"]),
            )
        if ds.labels is None:
            raise ValueError(f"dataset {self.name!r} has no labels; experiments need them")
        return Dataset(name=self.name, features=ds.features, labels=ds.labels, normalized=False)


@dataclass(frozen=True)
class AlgorithmSpec:
    algorithm: str
    features: str

    def __post_init__(self):
        if self.algorithm not in CLUSTERING_ADAPTERS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; registered: {sorted(CLUSTERING_ADAPTERS)}"
            )
        if self.features not in FEATURE_SOURCES:
            raise ValueError(f"features must be one of {FEATURE_SOURCES}, got {self.features!r}")

    @property
    def label(self) -> str:
        return f"{self.algorithm}.{self.features}"


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: list[DatasetSpec]
    algorithms: list[AlgorithmSpec]
    seeds: list[int]
    output_dir: str
    hidden_width: int = 100
    epochs: int = 30
    epsilon: float = 1e-8
    lambda_: float = 0.7
    sign_mode: str = "paper_exact"
    constraint_rate: float = 0.1
    use_sampled_hidden: bool = True
    constraint_fractions: list[float] = field(
        default_factory=lambda: [round(0.01 * i, 2) for i in range(1, 9)]
    )
    folds: int = 10

    def __post_init__(self):
        if not self.datasets or not self.algorithms or not self.seeds:
            raise ValueError("datasets, algorithms, and seeds must all be non-empty")
        if any(int(s) < 0 for s in self.seeds):
            raise ValueError("seeds must be non-negative")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate algorithm entries")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        datasets = [DatasetSpec(**d) for d in doc["datasets"]]
        algorithms = [AlgorithmSpec(**a) for a in doc["algorithms"]]
        kwargs = {
            k: doc[k]
            for k in (
                "hidden_width",
                "epochs",
                "epsilon",
                "sign_mode",
                "constraint_rate",
                "use_sampled_hidden",
                "constraint_fractions",
                "folds",
            )
            if k in doc
        }
        if "lambda" in doc:
            kwargs["lambda_"] = doc["lambda"]
        return cls(
            datasets=datasets,
            algorithms=algorithms,
            seeds=[int(s) for s in doc["seeds"]],
            output_dir=doc["output_dir"],
            **kwargs,
        )

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ReportTable:
    """Aggregated scores plus raw rows, failures, rank statistics, and the
    constraint provenance needed to audit fold hygiene."""

    cells: dict  # (dataset, algorithm, fraction) -> metric -> {"mean", "variance"} | None
    long_rows: list  # (dataset, algorithm, fraction, seed, fold, metric, value)
    failures: dict  # (dataset, algorithm, fraction, seed, fold) -> message
    score_matrix: ScoreMatrix | None
    friedman: dict | None
    provenance: list  # per (dataset, seed, fold) constraint/fold records
    datasets: list[str]
    algorithms: list[str]
    fractions: list[float]
    seeds: list[int]
    folds: int

    @property
    def any_failed(self) -> bool:
        return bool(self.failures)


def _score_task(cfg: ExperimentConfig, di: int, spec_data: Dataset, si: int, fi: int, folds):
    """All scoring rows, failures, and provenance for one (dataset, seed, fold)."""
    seed = cfg.seeds[si]
    fold = folds[fi]
    feats = spec_data.features
    labels = spec_data.labels
    train_idx, test_idx = fold.train_indices, fold.test_indices
    train_ds = Dataset(
        name=spec_data.name, features=feats[train_idx], labels=labels[train_idx], normalized=True
    )
    test_ds = Dataset(
        name=spec_data.name, features=feats[test_idx], labels=labels[test_idx], normalized=True
    )
    n_classes = int(len(np.unique(labels)))
    rows, failures = [], {}

    def fail(alg_label, fraction, exc):
        failures[(spec_data.name, alg_label, fraction, seed, fi)] = f"{type(exc).__name__}: {exc}"

    train_css = sample_constraints_incremental(
        train_ds.labels, cfg.constraint_fractions, derive_seed(seed, di, fi, _TAG_CONSTRAINTS)
    )
    provenance = {
        "dataset": spec_data.name,
        "seed": seed,
        "fold": fi,
        "train_indices": [int(i) for i in train_idx],
        "test_indices": [int(i) for i in test_idx],
        "training_constraints": {},
    }
    for fraction, cs in zip(cfg.constraint_fractions, train_css):
        global_must = [[int(train_idx[i]), int(train_idx[j])] for i, j in cs.must]
        global_cannot = [[int(train_idx[i]), int(train_idx[j])] for i, j in cs.cannot]
        provenance["training_constraints"][repr(fraction)] = {
            "must": global_must,
            "cannot": global_cannot,
            "fingerprint": constraint_fingerprint(cs),
        }

    wanted = {a.features for a in cfg.algorithms}
    feature_sets: dict[tuple, np.ndarray] = {}
    feature_sets[("raw", None)] = test_ds.features
    if "grbm" in wanted:
        params = train_grbm(
            train_ds,
            TrainConfig(cfg.epsilon, cfg.epochs, seed=derive_seed(seed, di, fi, _TAG_GRBM)),
            cfg.hidden_width,
        )
        feature_sets[("grbm", None)] = extract_features(params, test_ds)
    if "pcgrbm" in wanted:
        for fraction, cs in zip(cfg.constraint_fractions, train_css):
            guided_cfg = PcgrbmConfig(
                base=TrainConfig(cfg.epsilon, cfg.epochs, seed=derive_seed(seed, di, fi, _TAG_PCGRBM)),
                lambda_=cfg.lambda_,
                sign_mode=cfg.sign_mode,
                constraint_rate=cfg.constraint_rate,
                use_sampled_hidden=cfg.use_sampled_hidden,
            )
            params = train_pcgrbm(train_ds, cs, guided_cfg, cfg.hidden_width)
            feature_sets[("pcgrbm", fraction)] = extract_features(params, test_ds)

    result_cache: dict[tuple, object] = {}
    for ai, alg in enumerate(cfg.algorithms):
        needs_constraints = alg.algorithm in _CONSTRAINT_CONSUMERS
        for fraction in cfg.constraint_fractions:
            feat_key = ("pcgrbm", fraction) if alg.features == "pcgrbm" else (alg.features, None)
            if feat_key not in feature_sets:
                continue
            cache_key = (ai, feat_key) if not needs_constraints else None
            try:
                if cache_key is not None and cache_key in result_cache:
                    result = result_cache[cache_key]
                else:
                    test_constraints = None
                    if needs_constraints:
                        test_constraints = sample_constraints(
                            test_ds.labels,
                            fraction,
                            derive_seed(seed, di, fi, _TAG_TEST_CONSTRAINTS),
                        )
                    result = CLUSTERING_ADAPTERS[alg.algorithm](
                        feature_sets[feat_key],
                        n_classes,
                        test_constraints,
                        derive_seed(seed, di, fi, _TAG_CLUSTER, ai),
                    )
                    if cache_key is not None:
                        result_cache[cache_key] = result
                scores = {
                    "accuracy": accuracy(test_ds.labels, result),
                    "purity": purity(test_ds.labels, result),
                }
            except Exception as exc:  # recorded, run continues
                fail(alg.label, fraction, exc)
                continue
            for metric in METRICS:
                rows.append((spec_data.name, alg.label, fraction, seed, fi, metric, scores[metric]))
    return rows, failures, provenance


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ReportTable:
    datasets = [(di, spec, normalize(spec.load())) for di, spec in enumerate(cfg.datasets)]

    tasks = []
    for di, spec, data in datasets:
        for si, seed in enumerate(cfg.seeds):
            folds = kfold(data.n, cfg.folds, derive_seed(seed, di, _TAG_FOLDS))
            for fi in range(cfg.folds):
                tasks.append((di, data, si, fi, folds))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda t: _score_task(cfg, *t), tasks))
    else:
        outcomes = [_score_task(cfg, *t) for t in tasks]

    rows, failures, provenance = [], {}, []
    for task_rows, task_failures, task_prov in outcomes:
        rows.extend(task_rows)
        failures.update(task_failures)
        provenance.append(task_prov)

    dataset_names = [spec.name for _, spec, _ in datasets]
    alg_labels = [a.label for a in cfg.algorithms]
    cells = {}
    by_cell: dict[tuple, dict[str, list[float]]] = {}
    for name, label, fraction, seed, fi, metric, value in rows:
        by_cell.setdefault((name, label, fraction), {}).setdefault(metric, []).append(value)
    for name in dataset_names:
        for label in alg_labels:
            for fraction in cfg.constraint_fractions:
                values = by_cell.get((name, label, fraction))
                cell = {}
                for metric in METRICS:
                    vals = (values or {}).get(metric, [])
                    if vals:
                        arr = np.asarray(vals)
                        var = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
                        cell[metric] = {"mean": float(arr.mean()), "variance": var}
                    else:
                        cell[metric] = None
                cells[(name, label, fraction)] = cell

    score_matrix = None
    friedman = None
    if len(dataset_names) >= 2 and len(alg_labels) >= 2:
        top = cfg.constraint_fractions[-1]
        matrix = np.full((len(dataset_names), len(alg_labels)), np.nan)
        for i, name in enumerate(dataset_names):
            for j, label in enumerate(alg_labels):
                cell = cells[(name, label, top)]["accuracy"]
                if cell is not None:
                    matrix[i, j] = cell["mean"]
        if np.all(np.isfinite(matrix)):
            score_matrix = ScoreMatrix(matrix, row_names=dataset_names, col_names=alg_labels)
            friedman = friedman_aligned_test(score_matrix, higher_is_better=True)

    return ReportTable(
        cells=cells,
        long_rows=rows,
        failures=failures,
        score_matrix=score_matrix,
        friedman=friedman,
        provenance=provenance,
        datasets=dataset_names,
        algorithms=alg_labels,
        fractions=list(cfg.constraint_fractions),
        seeds=list(cfg.seeds),
        folds=cfg.folds,
    )


def check_no_test_leakage(report: ReportTable) -> None:
    """Raise if any training constraint pair touches its fold's test indices."""
    for rec in report.provenance:
        test = set(rec["test_indices"])
        for fraction, block in rec["training_constraints"].items():
            for side in ("must", "cannot"):
                for i, j in block[side]:
                    if i in test or j in test:
                        raise AssertionError(
                            f"constraint ({i},{j}) at fraction {fraction} touches test fold "
                            f"(dataset {rec['dataset']}, seed {rec['seed']}, fold {rec['fold']})"
                        )


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def emit_report(report: ReportTable, formats, output_dir: str) -> list[str]:
    """Write report files; returns the paths written.

    Formats is a non-empty subset of {"csv", "json", "markdown"}. The
    constraint provenance log and the stats summary are always written.
    """
    formats = list(formats)
    allowed = {"csv", "json", "markdown"}
    if not formats:
        raise ValueError("at least one output format is required")
    unknown = set(formats) - allowed
    if unknown:
        raise ValueError(f"unknown formats: {sorted(unknown)}; allowed: {sorted(allowed)}")
    os.makedirs(output_dir, exist_ok=True)
    written = []

    def path(name: str) -> str:
        written.append(os.path.join(output_dir, name))
        return written[-1]

    prov_doc = {"records": report.provenance}
    with open(path("provenance.json"), "w", encoding="utf-8") as fh:
        json.dump(prov_doc, fh, sort_keys=True, indent=1)
        fh.write("\n")

    stats_doc = {"T": None, "df": None, "p_one_tailed": None, "p_two_tailed": None}
    if report.friedman is not None:
        stats_doc = {k: report.friedman[k] for k in ("T", "df", "p_one_tailed", "p_two_tailed")}
    with open(path("stats.json"), "w", encoding="utf-8") as fh:
        json.dump(stats_doc, fh, sort_keys=True, indent=1)
        fh.write("\n")

    if "json" in formats:
        doc = {
            "datasets": report.datasets,
            "algorithms": report.algorithms,
            "fractions": report.fractions,
            "seeds": report.seeds,
            "folds": report.folds,
            "cells": {
                f"{name}|{label}|{fraction!r}": cell
                for (name, label, fraction), cell in sorted(report.cells.items())
            },
            "failures": {
                f"{name}|{label}|{fraction!r}|seed={seed}|fold={fold}": msg
                for (name, label, fraction, seed, fold), msg in sorted(report.failures.items())
            },
            "stats": stats_doc,
        }
        if report.score_matrix is not None:
            doc["score_matrix"] = {
                "rows": report.score_matrix.row_names,
                "columns": report.score_matrix.col_names,
                "accuracy_means": report.score_matrix.scores.tolist(),
            }
            doc["ranks"] = report.friedman["ranks"].ranks.tolist()
        with open(path("report.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")

    if "csv" in formats:
        with open(path("long.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "algorithm", "fraction", "seed", "fold", "metric", "value"])
            for row in report.long_rows:
                writer.writerow([row[0], row[1], repr(row[2]), row[3], row[4], row[5], repr(row[6])])
        for metric in METRICS:
            for fraction in report.fractions:
                name = f"summary_{metric}_pc{fraction!r}.csv"
                with open(path(name), "w", newline="", encoding="utf-8") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["dataset"] + report.algorithms)
                    for ds in report.datasets:
                        row = [ds]
                        for label in report.algorithms:
                            cell = report.cells[(ds, label, fraction)][metric]
                            row.append(
                                "failed" if cell is None else f"{_fmt(cell['mean'])}±{_fmt(cell['variance'])}"
                            )
                        writer.writerow(row)
        if report.score_matrix is not None:
            with open(path("ranks.csv"), "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["dataset"] + report.algorithms)
                for ds, rank_row in zip(report.datasets, report.friedman["ranks"].ranks):
                    writer.writerow([ds] + [repr(float(r)) for r in rank_row])

    if "markdown" in formats:
        for metric in METRICS:
            lines = [f"# {metric} (mean±variance over seeds×folds)", ""]
            for fraction in report.fractions:
                lines.append(f"## constraint fraction {fraction!r}")
                lines.append("")
                lines.append("| dataset | " + " | ".join(report.algorithms) + " |")
                lines.append("|" + "---|" * (len(report.algorithms) + 1))
                for ds in report.datasets:
                    cells = []
                    for label in report.algorithms:
                        cell = report.cells[(ds, label, fraction)][metric]
                        cells.append(
                            "failed" if cell is None else f"{_fmt(cell['mean'])}±{_fmt(cell['variance'])}"
                        )
                    lines.append("| " + " | ".join([ds] + cells) + " |")
                lines.append("")
            with open(path(f"summary_{metric}.md"), "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")

    return written
