"""Label-distribution metrics over neighborhoods and the group diagnostics built on them.

Node homophily (NH) looks at direct neighbors agreeing with the target;
neighborhood confusion (NC) looks at how dominant the majority class is in
the k-hop ego-set, the target included. Both, and the normalized entropy
NC is bounded by, live in [0, 1].
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, InputError
from .graph import CsrMatrix, KHopIndex, check_partition

log = logging.getLogger(__name__)


def _check_labels(labels: np.ndarray, n: int, C: int | None = None) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InputError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and labels.min() < 0:
        raise InputError("negative class id")
    if C is not None and labels.size and labels.max() >= C:
        raise InputError(f"class id {labels.max()} outside [0, {C})")
    return labels.astype(np.int64)


def _check_classes(C: int) -> None:
    if C < 2:
        raise ConfigError(f"class count must be at least 2 (log C is the normalizer), got {C}")


def _check_threshold(T: float) -> None:
    if not 0.0 < T < 1.0:
        raise ConfigError(f"threshold T must lie in the open interval (0, 1), got {T}")


def ego_class_counts(index: KHopIndex, labels: np.ndarray, C: int) -> np.ndarray:
    """n x C matrix of class counts over each node's neighbors plus the node itself."""
    n = index.n
    rows = np.concatenate([index.owners(), np.arange(n)])
    cols = np.concatenate([labels[index.indices], labels])
    counts = sp.coo_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(n, C))
    return counts.toarray()


def node_homophily(index1: KHopIndex, labels: np.ndarray) -> np.ndarray:
    """Fraction of direct neighbors sharing the node's label; 0 for isolated nodes."""
    if index1.k != 1:
        raise ConfigError("node homophily is defined on the 1-hop index")
    labels = _check_labels(labels, index1.n)
    same = labels[index1.indices] == labels[index1.owners()]
    agree = np.bincount(index1.owners()[same], minlength=index1.n).astype(np.float64)
    size = index1.sizes().astype(np.float64)
    out = np.zeros(index1.n)
    np.divide(agree, size, out=out, where=size > 0)
    return out


def neighborhood_confusion(index: KHopIndex, labels: np.ndarray, C: int) -> np.ndarray:
    """-log(majority fraction in the ego-set) / log C, per node."""
    _check_classes(C)
    labels = _check_labels(labels, index.n, C)
    counts = ego_class_counts(index, labels, C)
    size = index.sizes() + 1
    nc = -np.log(counts.max(axis=1) / size) / math.log(C)
    # unanimous sets give -0.0; keep the sign clean
    return np.maximum(nc, 0.0)


def entropy_oracle(index: KHopIndex, labels: np.ndarray, C: int) -> np.ndarray:
    """Shannon entropy of the ego-set label distribution divided by log C.

    Counted independently of ``neighborhood_confusion`` (per-node Counter)
    so the two can cross-check each other.
    """
    _check_classes(C)
    labels = _check_labels(labels, index.n, C)
    out = np.zeros(index.n)
    logC = math.log(C)
    for i in range(index.n):
        counter = Counter(labels[index.neighbors(i)].tolist())
        counter[int(labels[i])] += 1
        m = sum(counter.values())
        h = -sum((c / m) * math.log(c / m) for c in counter.values() if c)
        out[i] = max(h / logC, 0.0)
    return out


def build_masks(nc: np.ndarray, T: float) -> tuple[np.ndarray, np.ndarray]:
    """(low, high) masks: low keeps NC <= T, high keeps NC > T."""
    _check_threshold(T)
    nc = np.asarray(nc, dtype=np.float64)
    high = nc > T
    return ~high, high


def nh_masks(nh: np.ndarray, T: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Homophily split: homophilous (NH >= T) go low, heterophilous go high."""
    _check_threshold(T)
    nh = np.asarray(nh, dtype=np.float64)
    low = nh >= T
    return low, ~low


@dataclass
class NcState:
    """Current per-node NC values and the masks derived from them."""

    k: int
    T: float
    nc: np.ndarray
    mask_low: np.ndarray
    mask_high: np.ndarray
    version: int = 0

    @classmethod
    def initial(cls, n: int, k: int, T: float) -> NcState:
        nc = np.zeros(n)
        low, high = build_masks(nc, T)
        return cls(k, T, nc, low, high)

    def update(self, nc: np.ndarray, masks: tuple[np.ndarray, np.ndarray] | None = None) -> None:
        low, high = masks if masks is not None else build_masks(nc, self.T)
        if not check_partition(low, high):
            raise InputError("masks do not partition the node set")
        self.nc = np.asarray(nc, dtype=np.float64)
        self.mask_low, self.mask_high = low, high
        self.version += 1


@dataclass
class GroupReport:
    """Equal-width binning of a metric with per-bin accuracy and high-group share.

    Empty bins carry ``None`` for accuracy and proportion.
    """

    edges: list[float]
    counts: list[int]
    accuracy: list[float | None]
    high_proportion: list[float | None] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "edges": self.edges,
            "counts": self.counts,
            "accuracy": self.accuracy,
            "high_proportion": self.high_proportion,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GroupReport:
        return cls(list(d["edges"]), list(d["counts"]), list(d["accuracy"]), list(d["high_proportion"]))


def group_report(values: np.ndarray, correct: np.ndarray, high_flag: np.ndarray,
                 bins: int = 10) -> GroupReport:
    values = np.asarray(values, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    high_flag = np.asarray(high_flag, dtype=bool)
    if not (values.shape == correct.shape == high_flag.shape):
        raise InputError("values, correct and high_flag must be aligned")
    which = np.clip(np.floor(values * bins).astype(np.int64), 0, bins - 1)
    counts = np.bincount(which, minlength=bins)
    hits = np.bincount(which, weights=correct.astype(float), minlength=bins)
    highs = np.bincount(which, weights=high_flag.astype(float), minlength=bins)
    acc: list[float | None] = []
    prop: list[float | None] = []
    for c, h, g in zip(counts, hits, highs):
        acc.append(float(h / c) if c else None)
        prop.append(float(g / c) if c else None)
    edges = [b / bins for b in range(bins + 1)]
    return GroupReport(edges, counts.tolist(), acc, prop)


def mask_recall(pseudo_high: np.ndarray, truth_high: np.ndarray) -> float:
    pseudo_high = np.asarray(pseudo_high, dtype=bool)
    truth_high = np.asarray(truth_high, dtype=bool)
    if pseudo_high.shape != truth_high.shape:
        raise InputError("masks have different lengths")
    n_truth = int(truth_high.sum())
    if n_truth == 0:
        log.debug("mask recall is vacuous: ground-truth high group is empty")
        return 1.0
    return float((pseudo_high & truth_high).sum() / n_truth)


def high_nc_proportion(nc: np.ndarray, T: float) -> float:
    nc = np.asarray(nc, dtype=np.float64)
    return float(np.mean(nc > T)) if nc.size else 0.0


def duplication_rate(A: CsrMatrix, labels: np.ndarray, X: np.ndarray | None = None,
                     mode: str = "structure+label") -> float:
    """Share of nodes whose (neighbor set, label) or (feature row, label) key repeats.

    A collision group of size g counts g - 1 duplicates.
    """
    n = A.n_rows
    labels = _check_labels(labels, n)
    if n == 0:
        return 0.0
    if mode == "structure+label":
        keys = [(A.row(i)[0].tobytes(), int(labels[i])) for i in range(n)]
    elif mode == "feature+label":
        if X is None:
            raise InputError("feature+label duplication needs the feature matrix")
        X = np.ascontiguousarray(X, dtype=np.float64)
        keys = [(X[i].tobytes(), int(labels[i])) for i in range(n)]
    else:
        raise ConfigError(f"unknown duplication mode {mode!r}")
    groups = Counter(keys)
    return sum(g - 1 for g in groups.values()) / n
