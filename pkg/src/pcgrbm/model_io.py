"""Flat-file model persistence.

Models are stored as a single self-describing JSON document (UTF-8, sorted
keys). Floats round-trip exactly through repr. Layout, stable across
versions::

    {
      "format": "pcgrbm-model",
      "format_version": 1,
      "kind": "grbm" | "pcgrbm",
      "p": int, "q": int,
      "weights": [p*q floats, row-major],
      "visible_bias": [p floats],
      "hidden_bias": [q floats],
      "noise_scale": [p floats],
      "train_config": {"epsilon", "epochs", "batch_size", "seed"},
      "guidance": {            # present only for kind == "pcgrbm"
        "lambda", "sign_mode", "constraint_rate", "use_sampled_hidden",
        "constraints": {"must_count", "cannot_count", "fingerprint"}
      }
    }

The constraint fingerprint is the sha256 hex digest of the sorted pair lists,
recorded for provenance only.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .data import ConstraintSet
from .grbm import GrbmParams, TrainConfig
from .guided import PcgrbmConfig

FORMAT_NAME = "pcgrbm-model"
FORMAT_VERSION = 1


def constraint_fingerprint(cs: ConstraintSet) -> str:
    """Order-independent sha256 of the pair lists."""
    payload = json.dumps(
        {"must": sorted(cs.must), "cannot": sorted(cs.cannot)}, separators=(",", ":")
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _base_document(params: GrbmParams, train_config: TrainConfig) -> dict:
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "p": params.p,
        "q": params.q,
        "weights": params.W.ravel(order="C").tolist(),
        "visible_bias": params.a.tolist(),
        "hidden_bias": params.b.tolist(),
        "noise_scale": params.sigma.tolist(),
        "train_config": {
            "epsilon": train_config.epsilon,
            "epochs": train_config.epochs,
            "batch_size": train_config.batch_size,
            "seed": train_config.seed,
        },
    }


def save_grbm(path: str, params: GrbmParams, train_config: TrainConfig) -> None:
    doc = _base_document(params, train_config)
    doc["kind"] = "grbm"
    _write(path, doc)


def save_pcgrbm(
    path: str,
    params: GrbmParams,
    cfg: PcgrbmConfig,
    constraints: ConstraintSet,
) -> None:
    doc = _base_document(params, cfg.base)
    doc["kind"] = "pcgrbm"
    doc["guidance"] = {
        "lambda": cfg.lambda_,
        "sign_mode": cfg.sign_mode,
        "constraint_rate": cfg.constraint_rate,
        "use_sampled_hidden": cfg.use_sampled_hidden,
        "constraints": {
            "must_count": cs_count(constraints)[0],
            "cannot_count": cs_count(constraints)[1],
            "fingerprint": constraint_fingerprint(constraints),
        },
    }
    _write(path, doc)


def cs_count(cs: ConstraintSet) -> tuple[int, int]:
    return cs.n_must, cs.n_cannot


def _write(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str) -> tuple[GrbmParams, dict]:
    """Read a model file; returns the parameters and the raw document (for
    kind, training config, and guidance metadata)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {doc.get('format_version')}")
    p, q = int(doc["p"]), int(doc["q"])
    weights = np.asarray(doc["weights"], dtype=np.float64)
    if weights.shape != (p * q,):
        raise ValueError(f"{path}: expected {p * q} weights, got {weights.shape}")
    params = GrbmParams(
        W=weights.reshape(p, q),
        a=np.asarray(doc["visible_bias"], dtype=np.float64),
        b=np.asarray(doc["hidden_bias"], dtype=np.float64),
        sigma=np.asarray(doc["noise_scale"], dtype=np.float64),
    )
    return params, doc


def save_constraints(path: str, cs: ConstraintSet) -> None:
    doc = {"must": [list(p) for p in cs.must], "cannot": [list(p) for p in cs.cannot]}
    _write(path, doc)


def load_constraints(path: str) -> ConstraintSet:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return ConstraintSet(must=[tuple(p) for p in doc["must"]], cannot=[tuple(p) for p in doc["cannot"]])
