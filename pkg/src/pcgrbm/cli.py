"""Command-line surface: data prep, training, extraction, clustering,
evaluation, rank statistics, and full experiments.

Exit codes: 0 success, 1 runtime failure (and experiments with failed
cells), 2 usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import clustering as cl
from .data import ConstraintSet, load_csv, normalize, sample_constraints
from .evaluation import (
    ScoreMatrix,
    accuracy,
    friedman_aligned_test,
    purity,
    rank_table_from_ranks,
)
from .grbm import TrainConfig, extract_features, train_grbm
from .guided import PcgrbmConfig, train_pcgrbm
from .model_io import load_constraints, load_model, save_grbm, save_pcgrbm
from .pipeline import ExperimentConfig, emit_report, run_experiment

_ALGORITHMS = ("kmeans", "spectral", "ap", "cop-kmeans")


class UsageError(ValueError):
    """Bad flag combinations caught after parsing; exits with code 2."""


def _read_rows(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _write_rows(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _label_values(path: str, label_column: str) -> list[str]:
    header, rows = _read_rows(path)
    idx = header.index(label_column)
    return [row[idx] for row in rows]


def _cmd_normalize(args) -> int:
    ds = load_csv(args.input, label_column=args.labels_column)
    normed = normalize(ds)
    header, _ = _read_rows(args.input)
    feature_names = [h for h in header if h != args.labels_column]
    out_header = list(feature_names)
    out_rows = [[repr(float(v)) for v in row] for row in normed.features]
    if args.labels_column is not None:
        out_header.append(args.labels_column)
        for row, lab in zip(out_rows, _label_values(args.input, args.labels_column)):
            row.append(lab)
    _write_rows(args.out, out_header, out_rows)
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(epsilon=args.epsilon, epochs=args.epochs, seed=args.seed)


def _cmd_train_grbm(args) -> int:
    ds = normalize(load_csv(args.input, label_column=args.labels_column))
    cfg = _train_config(args)
    params = train_grbm(ds, cfg, args.hidden)
    save_grbm(args.out, params, cfg)
    return 0


def _cmd_train_pcgrbm(args) -> int:
    if (args.constraints is None) == (args.fraction is None):
        raise UsageError("give exactly one of --constraints or --fraction")
    ds = normalize(load_csv(args.input, label_column=args.labels_column))
    if args.constraints is not None:
        constraints = load_constraints(args.constraints)
    else:
        if ds.labels is None:
            raise ValueError("--fraction needs --labels-column to sample constraints from")
        constraints = sample_constraints(ds.labels, args.fraction, args.seed)
    cfg = PcgrbmConfig(
        base=_train_config(args),
        lambda_=getattr(args, "lambda"),
        sign_mode=args.sign_mode.replace("-", "_"),
    )
    params = train_pcgrbm(ds, constraints, cfg, args.hidden)
    save_pcgrbm(args.out, params, cfg, constraints)
    return 0


def _cmd_extract(args) -> int:
    params, _ = load_model(args.model)
    ds = normalize(load_csv(args.input, label_column=args.labels_column))
    features = extract_features(params, ds)
    header = [f"h{j}" for j in range(features.shape[1])]
    rows = [[repr(float(v)) for v in row] for row in features]
    if args.labels_column is not None:
        header = [args.labels_column] + header
        labels = _label_values(args.input, args.labels_column)
        rows = [[lab] + row for lab, row in zip(labels, rows)]
    _write_rows(args.out, header, rows)
    return 0


def _cmd_cluster(args) -> int:
    ds = load_csv(args.input, label_column=args.labels_column)
    data = ds.features
    constraints = load_constraints(args.constraints) if args.constraints else ConstraintSet()
    algorithm = args.algorithm
    if algorithm == "kmeans":
        result = cl.kmeans(data, args.k, restarts=10, seed=args.seed)
    elif algorithm == "spectral":
        result = cl.spectral(data, args.k, seed=args.seed)
    elif algorithm == "ap":
        result = cl.affinity_propagation(data)
    else:
        result = cl.cop_kmeans(data, args.k, constraints, seed=args.seed)
    header, rows = _read_rows(args.input)
    out_rows = [row + [str(int(c))] for row, c in zip(rows, result.assignments)]
    _write_rows(args.out, header + ["cluster"], out_rows)
    return 0


def _cmd_evaluate(args) -> int:
    header, rows = _read_rows(args.input)
    if "cluster" not in header:
        raise ValueError(f"{args.input}: no 'cluster' column; run the cluster subcommand first")
    if args.labels_column not in header:
        raise ValueError(f"{args.input}: no column named {args.labels_column!r}")
    lab_idx = header.index(args.labels_column)
    cl_idx = header.index("cluster")
    seen: dict[str, int] = {}
    truth = np.array([seen.setdefault(row[lab_idx], len(seen)) for row in rows], dtype=np.int64)
    assignments = np.array([int(row[cl_idx]) for row in rows], dtype=np.int64)
    result = cl.ClusteringResult(
        assignments=assignments, k=int(assignments.max()) + 1, converged=True, iterations=0
    )
    doc = {"accuracy": accuracy(truth, result), "purity": purity(truth, result)}
    text = json.dumps(doc, sort_keys=True, indent=1)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


def _cmd_stats(args) -> int:
    header, rows = _read_rows(args.input)
    col_names = header[1:]
    row_names = [row[0] for row in rows]
    values = np.array([[float(c) for c in row[1:]] for row in rows], dtype=np.float64)
    if args.format == "ranks":
        table = rank_table_from_ranks(values, row_names=row_names, col_names=col_names)
        outcome = friedman_aligned_test(table)
    else:
        matrix = ScoreMatrix(values, row_names=row_names, col_names=col_names)
        outcome = friedman_aligned_test(matrix, higher_is_better=True)
    print(f"T = {outcome['T']:.4f}")
    print(f"df = {outcome['df']}")
    print(f"p_one_tailed = {outcome['p_one_tailed']:.6g}")
    print(f"p_two_tailed = {outcome['p_two_tailed']:.6g}")
    if args.out:
        doc = {k: outcome[k] for k in ("T", "df", "p_one_tailed", "p_two_tailed")}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_file(args.input)
    output_dir = args.out or cfg.output_dir
    report = run_experiment(cfg, threads=args.threads)
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    emit_report(report, formats, output_dir)
    if report.any_failed:
        print(f"{len(report.failures)} cell run(s) failed; see report", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcgrbm",
        description="Constraint-guided Gaussian RBM feature learning and clustering toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(handler=handler)
        return p

    p = add("normalize", _cmd_normalize, "z-score a CSV's feature columns")
    p.add_argument("--input", required=True, help="input CSV (header row)")
    p.add_argument("--labels-column", default=None, help="label column to pass through untouched")
    p.add_argument("--out", required=True, help="output CSV path")

    for name, handler in (("train-grbm", _cmd_train_grbm), ("train-pcgrbm", _cmd_train_pcgrbm)):
        p = add(name, handler, f"{name.replace('-', ' ')} on a CSV (z-scored internally)")
        p.add_argument("--input", required=True, help="input CSV")
        p.add_argument("--labels-column", default=None, help="label column (excluded from features)")
        p.add_argument("--hidden", type=int, default=100, help="hidden width q")
        p.add_argument("--epochs", type=int, default=30, help="training epochs")
        p.add_argument("--epsilon", type=float, default=1e-8, help="learning rate")
        p.add_argument("--seed", type=int, required=True, help="rng seed (required)")
        p.add_argument("--out", required=True, help="model file to write")
        if name == "train-pcgrbm":
            p.add_argument("--lambda", type=float, default=0.7, help="CD/constraint balance in (0,1)")
            p.add_argument(
                "--sign-mode",
                choices=("paper-exact", "descent"),
                default="paper-exact",
                help="constraint-term convention",
            )
            p.add_argument("--constraints", default=None, help="constraints JSON file")
            p.add_argument("--fraction", type=float, default=None, help="sample constraints from labels at this fraction")

    p = add("extract", _cmd_extract, "hidden features for a CSV through a saved model")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--input", required=True, help="input CSV (z-scored internally)")
    p.add_argument("--labels-column", default=None, help="label column carried through to the output")
    p.add_argument("--out", required=True, help="feature CSV to write")

    p = add("cluster", _cmd_cluster, "cluster the rows of a CSV")
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--labels-column", default=None, help="column excluded from the features")
    p.add_argument("--algorithm", choices=_ALGORITHMS, required=True)
    p.add_argument("--k", type=int, default=3, help="cluster count (ignored by ap)")
    p.add_argument("--constraints", default=None, help="constraints JSON (cop-kmeans)")
    p.add_argument("--seed", type=int, required=True, help="rng seed (required)")
    p.add_argument("--out", required=True, help="output CSV (input columns + cluster)")

    p = add("evaluate", _cmd_evaluate, "accuracy and purity of a clustered CSV")
    p.add_argument("--input", required=True, help="CSV with label and cluster columns")
    p.add_argument("--labels-column", required=True, help="true-label column name")
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = add("stats", _cmd_stats, "Friedman aligned-ranks statistic from a CSV matrix")
    p.add_argument("--input", required=True, help="CSV: first column names, one column per algorithm")
    p.add_argument(
        "--format",
        choices=("scores", "ranks"),
        default="scores",
        help="interpret cells as raw scores (ranked internally) or as a ready joint ranking",
    )
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = add("experiment", _cmd_experiment, "run a full experiment from a JSON config")
    p.add_argument("--input", required=True, help="experiment config JSON")
    p.add_argument("--out", default=None, help="override the config's output_dir")
    p.add_argument("--threads", type=int, default=1, help="parallel fold workers")
    p.add_argument("--format", default="csv,json,markdown", help="comma-separated report formats")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
