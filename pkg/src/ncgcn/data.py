"""Datasets: the in-memory bundle, the TSV directory format, and SBM generators.

Bundle layout (UTF-8, LF, tab-separated)::

    edges.tsv     one undirected edge per line: ``u<TAB>v``
    features.tsv  n rows of f reals
    labels.tsv    n integers in [0, C)
    meta.json     {"n": .., "f": .., "C": .., "name": ..}
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .graph import CsrMatrix, build_csr

log = logging.getLogger(__name__)


@dataclass(eq=False)
class Dataset:
    A: CsrMatrix
    X: np.ndarray
    labels: np.ndarray
    C: int
    name: str = "unnamed"

    @property
    def n(self) -> int:
        return self.A.n_rows

    @property
    def f(self) -> int:
        return self.X.shape[1]

    def validate(self) -> None:
        n = self.A.n_rows
        if self.A.n_cols != n:
            raise DataError("adjacency is not square")
        if self.X.shape[0] != n or self.labels.shape != (n,):
            raise DataError(f"features {self.X.shape} / labels {self.labels.shape} do not match {n} nodes")
        if self.C < 2:
            raise DataError(f"need at least 2 classes, got {self.C}")
        if self.labels.min() < 0 or self.labels.max() >= self.C:
            raise DataError(f"labels must lie in [0, {self.C})")
        missing = np.setdiff1d(np.arange(self.C), self.labels)
        if missing.size:
            raise DataError(f"classes {missing.tolist()} have no nodes")
        dense_check = self.A._scipy
        if (dense_check != dense_check.T).nnz:
            raise DataError("adjacency is not symmetric")
        if dense_check.diagonal().any():
            raise DataError("adjacency has self-loops")
        if not np.all(np.isfinite(self.X)):
            raise DataError("non-finite feature value")

    def edge_list(self) -> np.ndarray:
        """Undirected edges (u < v), sorted."""
        rows = self.A.row_ids()
        keep = rows < self.A.col_idx
        return np.stack([rows[keep], self.A.col_idx[keep]], axis=1)

    def same_as(self, other: Dataset) -> bool:
        return (self.C == other.C and self.name == other.name
                and np.array_equal(self.A.row_ptr, other.A.row_ptr)
                and np.array_equal(self.A.col_idx, other.A.col_idx)
                and np.array_equal(self.A.values, other.A.values)
                and np.array_equal(self.X, other.X)
                and np.array_equal(self.labels, other.labels))


# -- bundle I/O ---------------------------------------------------------------

def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DataError(f"missing bundle file: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_bundle(path: str | Path) -> Dataset:
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise DataError(f"missing bundle file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        n, f, C = int(meta["n"]), int(meta["f"]), int(meta["C"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{meta_path}: needs integer fields n, f, C ({exc})") from exc
    name = str(meta.get("name", path.name))

    edges = []
    for ln, line in enumerate(_read_lines(path / "edges.tsv"), 1):
        parts = line.split("\t")
        try:
            u, v = (int(p) for p in parts)
        except ValueError:
            raise DataError(f"edges.tsv line {ln}: expected two integer columns, got {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"edges.tsv line {ln}: node id outside [0, {n})")
        edges.append((u, v))

    feat_lines = _read_lines(path / "features.tsv")
    if len(feat_lines) != n:
        raise DataError(f"features.tsv has {len(feat_lines)} rows, meta says n={n}")
    X = np.empty((n, f))
    for ln, line in enumerate(feat_lines, 1):
        parts = line.split("\t") if f else []
        if len(parts) != f:
            raise DataError(f"features.tsv line {ln}: expected {f} columns, got {len(parts)}")
        try:
            X[ln - 1] = [float(p) for p in parts]
        except ValueError:
            raise DataError(f"features.tsv line {ln}: non-numeric value") from None

    label_lines = _read_lines(path / "labels.tsv")
    if len(label_lines) != n:
        raise DataError(f"labels.tsv has {len(label_lines)} rows, meta says n={n}")
    labels = np.empty(n, dtype=np.int64)
    for ln, line in enumerate(label_lines, 1):
        try:
            labels[ln - 1] = int(line)
        except ValueError:
            raise DataError(f"labels.tsv line {ln}: expected an integer, got {line!r}") from None
        if not 0 <= labels[ln - 1] < C:
            raise DataError(f"labels.tsv line {ln}: label {labels[ln - 1]} outside [0, {C})")

    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    A = build_csr(e, n, symmetrize=True)
    n_loops = int(np.sum(e[:, 0] == e[:, 1]))
    n_dupes = (len(e) - n_loops) - A.nnz // 2
    if n_loops or n_dupes:
        log.warning("%s: dropped %d self-loops and %d duplicate edges", path, n_loops, n_dupes)
    data = Dataset(A, X, labels, C, name)
    data.validate()
    return data


def save_bundle(data: Dataset, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {"n": data.n, "f": data.f, "C": data.C, "name": data.name}
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    with open(path / "edges.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for u, v in data.edge_list():
            fh.write(f"{u}\t{v}\n")
    with open(path / "features.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for row in data.X:
            # repr round-trips float64 exactly
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")
    with open(path / "labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for y in data.labels:
            fh.write(f"{int(y)}\n")


# -- synthetic graphs ---------------------------------------------------------

@dataclass
class SbmSpec:
    n: int = 200
    C: int = 2
    p_in: float = 0.1
    p_out: float = 0.01
    f: int = 8
    feature_noise: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise ConfigError(f"need 0 <= p_out <= p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}")
        if self.C < 2 or self.n < self.C:
            raise ConfigError(f"need 2 <= C <= n, got C={self.C}, n={self.n}")
        if self.f < self.C:
            raise ConfigError(f"feature dim f={self.f} must be at least C={self.C} (one-hot class means)")
        if self.feature_noise < 0:
            raise ConfigError("feature_noise must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def balanced_labels(n: int, C: int) -> np.ndarray:
    """Contiguous class blocks; the first n % C classes get one extra node."""
    sizes = np.full(C, n // C)
    sizes[: n % C] += 1
    return np.repeat(np.arange(C), sizes)


def _sample_edges(prob_of, n: int, rng: np.random.Generator, chunk: int = 256) -> np.ndarray:
    """Independent Bernoulli edge draws for all pairs i < j, processed in row chunks."""
    found = []
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        P = prob_of(rows[:, None], np.arange(n)[None, :])
        upper = np.arange(n)[None, :] > rows[:, None]
        hit = (rng.random(P.shape) < P) & upper
        r, c = np.nonzero(hit)
        found.append(np.stack([rows[r], c], axis=1))
    return np.concatenate(found) if found else np.zeros((0, 2), dtype=np.int64)


def _class_features(labels: np.ndarray, f: int, sigma, rng: np.random.Generator) -> np.ndarray:
    X = np.zeros((labels.size, f))
    X[np.arange(labels.size), labels] = 1.0
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), labels.shape)
    return X + rng.normal(size=X.shape) * sigma[:, None]


def gen_sbm(spec: SbmSpec) -> Dataset:
    """Planted partition graph with one-hot class means plus Gaussian feature noise."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    labels = balanced_labels(spec.n, spec.C)

    def prob(i, j):
        return np.where(labels[i] == labels[j], spec.p_in, spec.p_out)

    edges = _sample_edges(prob, spec.n, rng)
    X = _class_features(labels, spec.f, spec.feature_noise, rng)
    return Dataset(build_csr(edges, spec.n), X, labels, spec.C, f"sbm-n{spec.n}-s{spec.seed}")


@dataclass
class MixedSbmSpec:
    """Two planted-partition regions sharing the same classes.

    The first half of the nodes forms the low-confusion region, the second
    half the high-confusion region; ``p_cross`` links across regions
    regardless of class.
    """

    n: int = 1000
    C: int = 4
    f: int = 16
    low_p_in: float = 0.02
    low_p_out: float = 0.0
    low_noise: float = 1.0
    high_p_in: float = 0.01
    high_p_out: float = 0.01
    high_noise: float = 0.5
    p_cross: float = 0.0005
    seed: int = 0

    def validate(self) -> None:
        for p in (self.low_p_in, self.low_p_out, self.high_p_in, self.high_p_out, self.p_cross):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"edge probability {p} outside [0, 1]")
        if self.f < self.C or self.C < 2:
            raise ConfigError("need C >= 2 and f >= C")


def gen_mixed_sbm(spec: MixedSbmSpec) -> Dataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    half = spec.n // 2
    region = np.zeros(spec.n, dtype=np.int64)
    region[half:] = 1
    labels = np.concatenate([balanced_labels(half, spec.C), balanced_labels(spec.n - half, spec.C)])
    # table[region_i, region_j, same_class]
    table = np.array([
        [[spec.low_p_out, spec.low_p_in], [spec.p_cross, spec.p_cross]],
        [[spec.p_cross, spec.p_cross], [spec.high_p_out, spec.high_p_in]],
    ])

    def prob(i, j):
        return table[region[i], region[j], (labels[i] == labels[j]).astype(np.int64)]

    edges = _sample_edges(prob, spec.n, rng)
    sigma = np.where(region == 0, spec.low_noise, spec.high_noise)
    X = _class_features(labels, spec.f, sigma, rng)
    return Dataset(build_csr(edges, spec.n), X, labels, spec.C, f"mixed-sbm-n{spec.n}-s{spec.seed}")
