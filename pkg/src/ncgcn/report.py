"""JSON report files and the CSV tables derived from them.

A report is a plain JSON object with ``"schema": 1`` and a ``kind``:

* ``runs``: one block per model variant, each with the effective config,
  per-seed results and the aggregate (``train`` writes one block,
  ``ablate`` writes four).
* ``metrics``: dataset-level metric distributions.

Floats are written with Python's shortest round-trip repr, so loading a
saved report gives back exactly the same numbers. Keys are sorted and no
timestamps are stored, so a repeated seeded run produces identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import jsonschema
import numpy as np

from .config import TrainConfig
from .data import Dataset
from .errors import SchemaError
from .graph import khop_index
from .metrics import (build_masks, duplication_rate, entropy_oracle, group_report, high_nc_proportion,
                      neighborhood_confusion, node_homophily)
from .trainer import RunResult, aggregate

SCHEMA_VERSION = 1

_num = {"type": "number"}
_opt_num = {"type": ["number", "null"]}

_group_report = {
    "type": "object",
    "required": ["edges", "counts", "accuracy", "high_proportion"],
    "properties": {
        "edges": {"type": "array", "items": _num},
        "counts": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "accuracy": {"type": "array", "items": _opt_num},
        "high_proportion": {"type": "array", "items": _opt_num},
    },
}

_history_row = {
    "type": "object",
    "required": ["epoch", "loss", "val_acc", "n_high", "high_recall", "nc_updated"],
    "properties": {
        "epoch": {"type": "integer", "minimum": 1},
        "loss": _num,
        "val_acc": _num,
        "n_high": {"type": "integer", "minimum": 0},
        "high_recall": _num,
        "test_acc_low": _opt_num,
        "test_acc_high": _opt_num,
        "nc_updated": {"type": "boolean"},
    },
}

_run = {
    "type": "object",
    "required": ["seed", "test_accuracy", "best_val_accuracy", "best_epoch", "epochs_run",
                 "per_group_test_accuracy", "split_hash", "final_nc", "final_high_nodes",
                 "alpha", "history", "nh_groups", "nc_groups", "invariant_violations"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "test_accuracy": _num,
        "best_val_accuracy": _num,
        "best_epoch": {"type": "integer", "minimum": 0},
        "epochs_run": {"type": "integer", "minimum": 0},
        "per_group_test_accuracy": {
            "type": "object", "required": ["low", "high"],
            "properties": {"low": _opt_num, "high": _opt_num},
        },
        "split_hash": {"type": "string"},
        "final_nc": {"type": "array", "items": _num},
        "final_high_nodes": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "alpha": {"type": "object", "required": ["low", "high"],
                  "properties": {"low": _num, "high": _num}},
        "history": {"type": "array", "items": _history_row},
        "nh_groups": {"oneOf": [{"type": "null"}, _group_report]},
        "nc_groups": {"oneOf": [{"type": "null"}, _group_report]},
        "invariant_violations": {"type": "integer", "minimum": 0},
    },
}

_stat = {
    "type": "object", "required": ["mean", "std", "count"],
    "properties": {"mean": _opt_num, "std": _opt_num, "count": {"type": "integer", "minimum": 0}},
}

_block = {
    "type": "object",
    "required": ["variant", "config", "runs", "aggregate", "summary"],
    "properties": {
        "variant": {"type": "string"},
        "config": {"type": "object"},
        "runs": {"type": "array", "items": _run},
        "aggregate": {"type": "object", "additionalProperties": _stat},
        "summary": {"type": "string"},
    },
}

_dataset = {
    "type": "object", "required": ["name", "n", "f", "C"],
    "properties": {"name": {"type": "string"}, "n": {"type": "integer"},
                   "f": {"type": "integer"}, "C": {"type": "integer"}},
}

_distribution = {
    "type": "object", "required": ["mean", "std", "min", "max", "histogram"],
    "properties": {"mean": _num, "std": _num, "min": _num, "max": _num,
                   "histogram": _group_report},
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema", "kind", "config", "dataset"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "kind": {"enum": ["runs", "metrics"]},
        "config": {"type": "object"},
        "dataset": _dataset,
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "runs"}}},
         "then": {"required": ["blocks"],
                  "properties": {"blocks": {"type": "array", "minItems": 1, "items": _block}}}},
        {"if": {"properties": {"kind": {"const": "metrics"}}},
         "then": {"required": ["metrics"],
                  "properties": {"metrics": {
                      "type": "object",
                      "required": ["nc", "nh", "entropy", "high_nc_proportion", "duplication"],
                      "properties": {
                          "nc": _distribution, "nh": _distribution, "entropy": _distribution,
                          "high_nc_proportion": _num,
                          "duplication": {"type": "object", "additionalProperties": _num},
                      }}}}},
    ],
}

_VALIDATOR = jsonschema.Draft202012Validator(REPORT_SCHEMA)


def validate_report(doc) -> None:
    """Raise SchemaError naming the offending field, e.g. ``blocks[0].runs[2].seed``."""
    errors = list(_VALIDATOR.iter_errors(doc))
    if not errors:
        return
    # the deepest error names the most specific field
    err = max(errors, key=lambda e: len(e.absolute_path))
    where = _field_path(err.absolute_path) or "<root>"
    raise SchemaError(f"report field {where}: {err.message}")


def _field_path(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out


def summary_line(agg: dict) -> str:
    """Mean test accuracy (%) plus-minus standard deviation, two decimals."""
    stat = agg["test_accuracy"]
    if stat["mean"] is None:
        return "n/a"
    return f"{100 * stat['mean']:.2f} ± {100 * stat['std']:.2f}"


def dataset_info(data: Dataset) -> dict:
    return {"name": data.name, "n": data.n, "f": data.f, "C": data.C}


def run_block(config: TrainConfig, results: list[RunResult]) -> dict:
    agg = aggregate(results)
    return {
        "variant": config.variant,
        "config": config.to_dict(),
        "runs": [r.to_dict() for r in results],
        "aggregate": agg,
        "summary": summary_line(agg),
    }


def runs_report(config: TrainConfig, data: Dataset, blocks: list[dict]) -> dict:
    return {"schema": SCHEMA_VERSION, "kind": "runs", "config": config.to_dict(),
            "dataset": dataset_info(data), "blocks": blocks}


def block_results(block: dict) -> list[RunResult]:
    return [RunResult.from_dict(r) for r in block["runs"]]


def _distribution_of(values, high_flag) -> dict:
    values = np.asarray(values, dtype=np.float64)
    hist = group_report(values, np.zeros(values.shape, dtype=bool), high_flag).to_dict()
    # a dataset-level histogram has no predictions to score
    hist["accuracy"] = [None] * len(hist["counts"])
    return {"mean": float(values.mean()), "std": float(values.std()),
            "min": float(values.min()), "max": float(values.max()), "histogram": hist}


def metrics_report(data: Dataset, k: int, T: float) -> dict:
    """Ground-truth NC, NH and entropy distributions, high-NC share and duplication rates."""
    index = khop_index(data.A, k)
    index1 = index if k == 1 else khop_index(data.A, 1)
    nc = neighborhood_confusion(index, data.labels, data.C)
    _, high = build_masks(nc, T)
    return {
        "schema": SCHEMA_VERSION,
        "kind": "metrics",
        "config": {"k": k, "T": T},
        "dataset": dataset_info(data),
        "metrics": {
            "nc": _distribution_of(nc, high),
            "nh": _distribution_of(node_homophily(index1, data.labels), high),
            "entropy": _distribution_of(entropy_oracle(index, data.labels, data.C), high),
            "high_nc_proportion": high_nc_proportion(nc, T),
            "duplication": {
                "structure+label": duplication_rate(data.A, data.labels, mode="structure+label"),
                "feature+label": duplication_rate(data.A, data.labels, data.X, mode="feature+label"),
            },
        },
    }


def dumps_report(doc: dict) -> str:
    validate_report(doc)
    try:
        return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False, allow_nan=False) + "\n"
    except ValueError as exc:
        raise SchemaError(f"report contains a non-finite number: {exc}") from exc


def save_report(doc: dict, path: str | Path) -> None:
    text = dumps_report(doc)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def loads_report(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    validate_report(doc)
    return doc


def load_report(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"report file not found: {path}")
    return loads_report(path.read_text(encoding="utf-8"))


# -- CSV tables -----------------------------------------------------------------

TABLES = ("deciles", "groups", "recall")


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _histogram_rows(prefix: list, g: dict):
    edges = g["edges"]
    for b, count in enumerate(g["counts"]):
        yield prefix + [edges[b], edges[b + 1], count, g["accuracy"][b], g["high_proportion"][b]]


def table_csv(doc: dict, table: str) -> str:
    """Render one CSV table from a loaded report.

    deciles: accuracy per metric bin (NH and NC) for runs reports, or the
    metric histograms for metrics reports. groups: low/high-confusion group
    accuracy per run, or group sizes for metrics reports. recall: the
    per-epoch high-mask recall history (runs reports only).
    """
    if table not in TABLES:
        raise SchemaError(f"unknown table {table!r}; expected one of {TABLES}")
    head = ["bin_lo", "bin_hi", "count", "accuracy", "high_proportion"]
    if doc["kind"] == "metrics":
        m = doc["metrics"]
        if table == "deciles":
            rows = [r for name in ("nc", "nh", "entropy") for r in _histogram_rows([name], m[name]["histogram"])]
            return _csv(["metric"] + head, rows)
        if table == "groups":
            p = m["high_nc_proportion"]
            return _csv(["group", "proportion"], [["low", 1.0 - p], ["high", p]])
        raise SchemaError("a metrics report has no training history; recall needs a runs report")

    if table == "deciles":
        rows = []
        for blk in doc["blocks"]:
            for run in blk["runs"]:
                for metric in ("nh", "nc"):
                    g = run[f"{metric}_groups"]
                    if g is not None:
                        rows.extend(_histogram_rows([blk["variant"], run["seed"], metric], g))
        return _csv(["variant", "seed", "metric"] + head, rows)
    if table == "groups":
        rows = [[blk["variant"], run["seed"], grp, run["per_group_test_accuracy"][grp]]
                for blk in doc["blocks"] for run in blk["runs"] for grp in ("low", "high")]
        return _csv(["variant", "seed", "group", "test_accuracy"], rows)
    rows = [[blk["variant"], run["seed"], h["epoch"], h["n_high"], h["high_recall"], h["val_acc"],
             h["nc_updated"]]
            for blk in doc["blocks"] for run in blk["runs"] for h in run["history"]]
    return _csv(["variant", "seed", "epoch", "n_high", "high_recall", "val_acc", "nc_updated"], rows)
